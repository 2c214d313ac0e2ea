from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depref.embedding import (
    BoundViolation,
    c_n_sequence,
    sample_embedded_degree_sequences,
    sample_jump_times,
    simulate_birth_process,
    simulate_embedding,
)
from depref.graph import sample_degree_sequences
from depref.harness.stats import chi_square_against, count_sequences
from depref.oracles import brute_force_model_distribution


def rng(seed=0):
    return np.random.default_rng(seed)


def test_birth_process_path():
    path = simulate_birth_process(2, 500.0, rng(1))
    assert path.jump_times[0] == 0
    assert np.all(path.holding_times > 0)
    assert path.count(0.0) == 2
    counts = path.count(np.linspace(0, 500, 50))
    assert np.all(np.diff(counts) >= 0)
    assert path.jump_times[-1] <= 500
    with pytest.raises(ValueError):
        path.count(501.0)


def test_birth_process_rejects_bad_input():
    with pytest.raises(ValueError):
        simulate_birth_process(0, 1.0, rng())
    with pytest.raises(ValueError):
        simulate_birth_process(1, 0.0, rng())


def test_expected_jump_time_n3():
    # E[T_3] = 1 + 2 for m = 1
    T = sample_jump_times(1, 3, 200_000, rng(2))
    assert T[:, 0].max() == 0
    se = T[:, 2].std() / math.sqrt(T.shape[0])
    assert abs(T[:, 2].mean() - 3.0) < 4 * se


def test_holding_time_means():
    T = sample_jump_times(3, 6, 100_000, rng(3))
    gaps = np.diff(T, axis=1).mean(axis=0)
    assert gaps == pytest.approx([3, 4, 5, 6, 7], rel=0.02)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_embedding_initial_state(m):
    state = simulate_embedding(3, m, rng(m))
    assert state.degrees_at(2).tolist() == [2 * m, m]
    assert state.tau[0] == 0
    # the first event after tau_2 sees D~ = 1/(2m) + 1/m
    assert state.event_rate[m] == pytest.approx(3 / (2 * m))
    assert state.d_tilde(2) == pytest.approx(3 / (2 * m))


@settings(max_examples=25, deadline=None)
@given(m=st.integers(1, 4), n=st.integers(2, 200), seed=st.integers(0, 2**32 - 1))
def test_embedding_invariants(m, n, seed):
    state = simulate_embedding(n, m, rng(seed))
    assert np.all(np.diff(state.tau) > 0)
    assert np.all(np.diff(state.event_time) > 0)
    assert state.event_vertex.size == m * (n - 1)
    # exactly m births in (tau_k, tau_{k+1}], all by processes 1..k
    for k in range(1, n):
        window = (state.event_time > state.tau[k - 1]) & (state.event_time <= state.tau[k])
        assert window.sum() == m
        assert state.event_vertex[window].max() <= k
    assert state.counts.sum() == m * (2 * n - 1)
    np.testing.assert_array_equal(state.degrees_at(n), state.counts)
    # rate recorded before each event equals sum of 1/count at that moment
    e = min(state.event_rate.size - 1, m * (n - 1) // 2)
    k, j = divmod(e, m)
    inter = state.intermediate_counts(k + 1, j)
    assert state.event_rate[e] == pytest.approx(np.sum(1.0 / inter), rel=1e-12)


def test_process_path_and_parents():
    state = simulate_embedding(50, 1, rng(4))
    parents = state.parents
    assert parents.size == 49
    assert all(parents[v - 2] < v for v in range(2, 51))
    path = state.process_path(1)
    assert path.count(path.horizon) == state.counts[0]
    with pytest.raises(ValueError):
        simulate_embedding(5, 2, rng()).parents


def test_normalizer_bounds_and_partial_sums():
    state = simulate_embedding(2001, 2, rng(5))
    seq = c_n_sequence(state, 1)
    assert seq.b.size == 2000
    n = np.arange(1, 2001)
    assert np.all(seq.b >= 4 / n) and np.all(seq.b <= 8 / n)
    assert seq.c_at(2000) == pytest.approx(seq.b.sum())
    later = c_n_sequence(state, 5)
    assert later.c_at(2000) == pytest.approx(seq.b[4:].sum())


def test_bound_violation_raised():
    state = simulate_embedding(20, 1, rng(6))
    state.event_rate[5] = 1e-3  # b_6 becomes far too large
    with pytest.raises(BoundViolation):
        c_n_sequence(state)
    assert not c_n_sequence(state, check=False).bounds_hold()


def test_batch_embedding_matches_single_runs():
    batch = sample_embedded_degree_sequences(6, 2, 3, rng(7))
    r = rng(7)
    for row in batch:
        np.testing.assert_array_equal(row, simulate_embedding(6, 2, r).counts)


@pytest.mark.parametrize("m", [1, 2])
def test_embedding_and_sampler_match_exact_law(m):
    exact = brute_force_model_distribution(4, m, "inverse")
    emb = chi_square_against(count_sequences(sample_embedded_degree_sequences(4, m, 100_000, rng(8))), exact)
    disc = chi_square_against(count_sequences(sample_degree_sequences(4, m, "inverse", 100_000, rng(9))), exact)
    assert emb.outside_support == disc.outside_support == 0
    assert emb.p_value > 1e-4 and disc.p_value > 1e-4


def test_d_tilde_over_n_near_lambda_star():
    from depref.limits import lambda_star
    state = simulate_embedding(20_000, 1, rng(10))
    assert abs(state.d_tilde(20_000) / 20_000 - lambda_star()) < 0.02
