from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depref.limits import (
    LimitDistribution,
    inverse_limit_pmf,
    inverse_sizebiased_limit,
    inverse_tail,
    inverse_tail_gamma,
    lambda_star,
    limit_summary,
    linear_limit_pmf,
    rho_hat,
    rho_hat_product_form,
    rho_hat_series,
    solve_lambda_star,
)

# independent high-precision root: 40 digits, hypergeometric-free direct sum
mpmath.mp.dps = 40


def _mp_rho(lam):
    return mpmath.nsum(lambda n: 1 / mpmath.rf(1 + 1 / lam, n) / lam ** n, [1, mpmath.inf])


LAMBDA_STAR_MP = float(mpmath.findroot(lambda x: _mp_rho(x) - 1, 0.64))


def test_rho_hat_at_one_is_e_minus_2():
    # sum_n 1/(n+1)! = e - 2
    assert abs(rho_hat(1.0, 1e-16) - (math.e - 2)) < 1e-12


def test_rho_hat_at_half():
    assert rho_hat(0.5) == pytest.approx(float(_mp_rho(mpmath.mpf("0.5"))), abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20.0))
def test_series_forms_agree(lam):
    assert rho_hat_series(lam).value == pytest.approx(rho_hat_product_form(lam), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_rho_hat_decreasing(a, b):
    if a < b:
        assert rho_hat(a) > rho_hat(b)


def test_truncation_error_below_tolerance():
    for lam in (0.2, 0.64, 3.0):
        s = rho_hat_series(lam, 1e-10)
        assert abs(s.value - float(_mp_rho(mpmath.mpf(lam)))) < 1e-10


def test_lambda_star_matches_high_precision_root():
    sol = solve_lambda_star()
    assert sol.lambda_star == pytest.approx(LAMBDA_STAR_MP, abs=1e-12)
    assert abs(sol.rho_hat_at_root - 1) < 1e-12
    assert lambda_star() == sol.lambda_star


def test_lambda_star_frozen_value():
    assert lambda_star() == pytest.approx(0.6419239877717, abs=1e-12)


def test_lambda_star_stable_under_refinement():
    assert abs(solve_lambda_star(series_tol=1e-12).lambda_star - solve_lambda_star().lambda_star) < 1e-10


def test_bracket_widening():
    sol = solve_lambda_star(bracket=(1.5, 3.0))
    assert sol.lambda_star == pytest.approx(LAMBDA_STAR_MP, abs=1e-12)
    assert sol.bracket[0] < LAMBDA_STAR_MP


def test_rejects_bad_lambda():
    with pytest.raises(ValueError):
        rho_hat(0.0)
    with pytest.raises(ValueError):
        inverse_limit_pmf(0)


def test_pmf_normalized_mean_two_mode_one():
    dist = LimitDistribution.solve()
    p = dist.pmf_vector()
    k = np.arange(p.size)
    assert abs(math.fsum(p) - 1) < 1e-10
    assert abs(math.fsum(k * p) - 2) < 1e-8
    summ = limit_summary()
    assert summ.mode == 1
    assert summ.mean == pytest.approx(2, abs=1e-8)


def test_tail_telescopes_and_matches_gamma_form():
    lam = lambda_star()
    for n in range(1, 31):
        direct = math.fsum(inverse_limit_pmf(k, lam) for k in range(n, 400))
        assert inverse_tail(n, lam) == pytest.approx(direct, rel=1e-10, abs=1e-300)
        assert inverse_tail_gamma(n, lam) == pytest.approx(inverse_tail(n, lam), rel=1e-10)


def test_tail_ratio_curve():
    lam = lambda_star()
    summ = limit_summary(lam)
    # tail(n+1)/tail(n) = 1/(1 + n lam)
    for n in (1, 5, 10):
        assert summ.tail_ratio_at(n) == pytest.approx(1 / (1 + n * lam))
    assert summ.tail_ratio_at(10) / summ.tail_ratio_at(1) == pytest.approx((1 + lam) / (1 + 10 * lam))


def test_size_biased_limits():
    lam = lambda_star()
    assert inverse_sizebiased_limit(1, lam) == pytest.approx(1 / (1 + lam))
    total = math.fsum(inverse_sizebiased_limit(k, lam) for k in range(1, 200))
    # the root condition itself: the size-biased masses sum to rho_hat(lam*) = 1
    assert total == pytest.approx(1.0, abs=1e-12)
    assert sum(linear_limit_pmf(k) for k in range(1, 60)) == pytest.approx(1.0)


def test_log_space_products_agree():
    lam = lambda_star()
    direct = 1.0
    for i in range(1, 60):
        direct /= 1 + i * lam
    assert inverse_tail(60, lam) == pytest.approx(direct, rel=1e-12)


def test_support_size():
    dist = LimitDistribution.solve()
    K = dist.support_size(1e-16)
    assert dist.tail(K + 1) < 1e-16 <= dist.tail(K)
