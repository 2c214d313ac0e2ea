"""Malthusian parameter and closed-form limiting degree laws.

The inverse model is governed by the root ``lambda_star`` of

    rho_hat(lam) = sum_{n>=1} prod_{i=1}^{n} 1 / (1 + i lam) = 1,

the expected Laplace transform of the rate-1/k pure birth point process.
The linear model's limits are all geometric: ``2**-k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "SeriesValue",
    "LambdaStar",
    "LimitDistribution",
    "LimitSummary",
    "rho_hat",
    "rho_hat_series",
    "rho_hat_product_form",
    "solve_lambda_star",
    "lambda_star",
    "inverse_limit_pmf",
    "inverse_tail",
    "inverse_tail_gamma",
    "inverse_sizebiased_limit",
    "linear_limit_pmf",
    "linear_sizebiased_limit",
    "limit_summary",
]

DEFAULT_SERIES_TOL = 1e-15
DEFAULT_ROOT_TOL = 1e-13
# Products of more than this many factors are accumulated as log sums.
LOG_SPACE_ABOVE = 30


@dataclass(frozen=True)
class SeriesValue:
    value: float
    terms: int


def rho_hat_series(lam: float, tol: float = DEFAULT_SERIES_TOL) -> SeriesValue:
    """Sum ``sum_{n>=1} prod_{i=0}^{n-1} 1/((i+1) lam + 1)`` with error below ``tol``.

    Consecutive terms satisfy ``t_n = t_{n-1} / (1 + n lam)``, so the tail after
    ``t_N`` is dominated by ``t_N * sum_j (1 + lam)^-j = t_N / lam``; summation
    stops at the first N with ``t_N / lam < tol``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    total = 0.0
    term = 1.0
    n = 0
    while True:
        n += 1
        term /= 1.0 + n * lam
        total += term
        if term / lam < tol:
            return SeriesValue(total, n)


def rho_hat(lam: float, tol: float = DEFAULT_SERIES_TOL) -> float:
    return rho_hat_series(lam, tol).value


def rho_hat_product_form(lam: float, tol: float = DEFAULT_SERIES_TOL) -> float:
    """The defining series written as ``sum_n prod_{i=1}^{n} 1/(1 + i lam)``.

    Each term is evaluated independently from a log-sum rather than by the
    running ratio used in :func:`rho_hat_series`.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    total = 0.0
    log_term = 0.0
    n = 0
    while True:
        n += 1
        log_term = -math.fsum(math.log1p(i * lam) for i in range(1, n + 1))
        term = math.exp(log_term)
        total += term
        if term / lam < tol:
            return total


@dataclass(frozen=True)
class LambdaStar:
    lambda_star: float
    rho_hat_at_root: float
    series_terms_used: int
    iterations: int
    bracket: tuple[float, float]

    def as_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "rho_hat_at_root": self.rho_hat_at_root,
            "series_terms_used": self.series_terms_used,
            "iterations": self.iterations,
        }


def solve_lambda_star(
    tol: float = DEFAULT_ROOT_TOL,
    series_tol: float = DEFAULT_SERIES_TOL,
    bracket: tuple[float, float] = (0.1, 2.0),
    max_iter: int = 200,
) -> LambdaStar:
    """Bisect for the root of ``rho_hat(lam) = 1``.

    Stops once ``|rho_hat - 1| < tol`` or the bracket collapses to adjacent
    floats. ``rho_hat`` is strictly decreasing, so a failure to bracket means
    the series evaluation is broken.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    lo, hi = bracket
    for _ in range(64):
        if rho_hat(lo, series_tol) > 1.0:
            break
        lo /= 2.0
    else:
        raise ArithmeticError("could not bracket the root from below")
    for _ in range(64):
        if rho_hat(hi, series_tol) < 1.0:
            break
        hi *= 2.0
    else:
        raise ArithmeticError("could not bracket the root from above")
    start = (lo, hi)

    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        s = rho_hat_series(mid, series_tol)
        it += 1
        if abs(s.value - 1.0) < tol or mid in (lo, hi) or it >= max_iter:
            return LambdaStar(mid, s.value, s.terms, it, start)
        if s.value > 1.0:
            lo = mid
        else:
            hi = mid


_CACHED: dict[tuple[float, float], LambdaStar] = {}


def lambda_star(tol: float = DEFAULT_ROOT_TOL, series_tol: float = DEFAULT_SERIES_TOL) -> float:
    """Memoized :func:`solve_lambda_star` value."""
    key = (tol, series_tol)
    if key not in _CACHED:
        _CACHED[key] = solve_lambda_star(tol, series_tol)
    return _CACHED[key].lambda_star


def _log_prod_inv(n: int, lam: float) -> float:
    """log of prod_{i=1}^{n} 1/(1 + i lam)."""
    return -math.fsum(math.log1p(i * lam) for i in range(1, n + 1))


def _prod_inv(n: int, lam: float) -> float:
    if n > LOG_SPACE_ABOVE:
        return math.exp(_log_prod_inv(n, lam))
    p = 1.0
    for i in range(1, n + 1):
        p /= 1.0 + i * lam
    return p


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"degree must be >= 1, got {k}")


def inverse_limit_pmf(k: int, lam: float | None = None) -> float:
    """Limiting fraction of degree-k vertices in the inverse model (m = 1)."""
    _check_k(k)
    lam = lambda_star() if lam is None else lam
    return k * lam / (k * lam + 1.0) * _prod_inv(k - 1, lam)


def inverse_tail(n: int, lam: float | None = None) -> float:
    """``sum_{k>=n} p~_k``, which telescopes to ``prod_{i=1}^{n-1} 1/(1 + i lam)``."""
    _check_k(n)
    lam = lambda_star() if lam is None else lam
    return _prod_inv(n - 1, lam)


def inverse_tail_gamma(n: int, lam: float | None = None) -> float:
    """Same tail via ``lam^-(n-1) Gamma(1 + 1/lam) / Gamma(n + 1/lam)``."""
    _check_k(n)
    lam = lambda_star() if lam is None else lam
    a = 1.0 / lam
    return math.exp(-(n - 1) * math.log(lam) + math.lgamma(1.0 + a) - math.lgamma(n + a))


def inverse_sizebiased_limit(k: int, lam: float | None = None) -> float:
    """Limit of P(next vertex joins a fixed vertex currently of degree k)."""
    _check_k(k)
    lam = lambda_star() if lam is None else lam
    return _prod_inv(k, lam)


def linear_limit_pmf(k: int) -> float:
    _check_k(k)
    return math.ldexp(1.0, -k)


def linear_sizebiased_limit(k: int) -> float:
    _check_k(k)
    return math.ldexp(1.0, -k)


@dataclass(frozen=True)
class LimitDistribution:
    """Limiting laws for both models; ``lambda_star`` only matters for inverse."""

    lambda_star: float

    @classmethod
    def solve(cls, tol: float = DEFAULT_ROOT_TOL) -> "LimitDistribution":
        return cls(lambda_star(tol))

    def pmf(self, k: int) -> float:
        return inverse_limit_pmf(k, self.lambda_star)

    def tail(self, n: int) -> float:
        return inverse_tail(n, self.lambda_star)

    def size_biased(self, k: int) -> float:
        return inverse_sizebiased_limit(k, self.lambda_star)

    @staticmethod
    def linear_pmf(k: int) -> float:
        return linear_limit_pmf(k)

    @staticmethod
    def linear_size_biased(k: int) -> float:
        return linear_sizebiased_limit(k)

    def support_size(self, eps: float = 1e-16) -> int:
        """Smallest K with tail(K + 1) < eps."""
        k = 1
        while self.tail(k + 1) >= eps:
            k += 1
        return k

    def pmf_vector(self, kmax: int | None = None) -> np.ndarray:
        """``p[k]`` for k = 0..kmax, with ``p[0] = 0``."""
        kmax = kmax or self.support_size()
        return np.array([0.0] + [self.pmf(k) for k in range(1, kmax + 1)])

    def size_biased_vector(self, kmax: int | None = None) -> np.ndarray:
        kmax = kmax or self.support_size()
        return np.array([0.0] + [self.size_biased(k) for k in range(1, kmax + 1)])


@dataclass(frozen=True)
class LimitSummary:
    mean: float
    mode: int
    tail_ratio: np.ndarray  # tail_ratio[n-1] = tail(n+1) / tail(n)

    def tail_ratio_at(self, n: int) -> float:
        return float(self.tail_ratio[n - 1])


def limit_summary(lam: float | None = None, n_ratio: int = 50) -> LimitSummary:
    """Mean, mode and tail-ratio curve of the inverse-model limit pmf."""
    dist = LimitDistribution(lambda_star() if lam is None else lam)
    p = dist.pmf_vector()
    k = np.arange(p.size)
    mean = math.fsum(k * p)
    mode = int(np.argmax(p))
    ratios = np.array([dist.tail(n + 1) / dist.tail(n) for n in range(1, n_ratio + 1)])
    return LimitSummary(mean=mean, mode=mode, tail_ratio=ratios)
