from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from depref.graph import (
    GraphState,
    ModelVariant,
    SamplerIndex,
    grow,
    init_graph,
    sample_degree_sequences,
)

VARIANTS = [ModelVariant.LINEAR, ModelVariant.INVERSE]


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("m", [1, 2, 5])
def test_initial_configuration(variant, m):
    g = init_graph(m, variant)
    assert g.n == 2 and g.k == 0
    assert g.degrees.tolist() == [2 * m, m]
    assert g.total_degree_existing == 3 * m


def test_rejects_bad_m():
    with pytest.raises(ValueError):
        init_graph(0, "linear")


def test_linear_probabilities_at_n2():
    # 1 - d/3 over one normalizing factor: degrees (2, 1) -> (1/3, 2/3)
    g = init_graph(1, "linear")
    assert g.attach_probs() == pytest.approx([1 / 3, 2 / 3])


def test_inverse_probabilities_at_n2():
    g = init_graph(1, "inverse")
    assert g.attach_probs() == pytest.approx([1 / 3, 2 / 3])
    assert g.inverse_weight_sum == pytest.approx(1.5)


@settings(max_examples=40, deadline=None)
@given(variant=st.sampled_from(VARIANTS), m=st.integers(1, 4),
       steps=st.integers(0, 60), seed=st.integers(0, 2**32 - 1))
def test_growth_invariants(variant, m, steps, seed):
    g = init_graph(m, variant)
    r = rng(seed)
    for _ in range(steps):
        partial = g.copy()
        for _ in range(m):
            p = partial.attach_probs()
            assert np.all(p >= 0)
            assert math.isclose(p.sum(), 1.0, rel_tol=1e-12)
            partial.attach_half_edge(r)
            assert partial.total_degree_existing == partial.k + m * (2 * partial.n - 1)
            assert int(partial.degrees.sum()) == partial.total_degree_existing
        g.add_vertex(r)
    assert int(g.degrees.sum()) == g.total_degree_existing == m * (2 * g.n - 1)
    assert np.all(g.degrees >= m)
    if variant is ModelVariant.INVERSE:
        assert g.inverse_weight_sum == pytest.approx(g.recomputed_inverse_weight_sum(), rel=1e-12)


@pytest.mark.parametrize("variant", VARIANTS)
def test_add_vertex_matches_advance_to(variant):
    a = init_graph(2, variant)
    b = init_graph(2, variant)
    ra, rb = rng(3), rng(3)
    for _ in range(200):
        a.add_vertex(ra)
    b.advance_to(202, rb)
    assert a.n == b.n == 202
    np.testing.assert_array_equal(a.degrees, b.degrees)
    assert a.total_degree_existing == b.total_degree_existing == 2 * (2 * 202 - 1)


def test_add_vertex_mid_step_rejected():
    g = init_graph(2, "linear")
    g.attach_half_edge(rng())
    with pytest.raises(RuntimeError):
        g.add_vertex(rng())
    with pytest.raises(RuntimeError):
        g.advance_to(10, rng())


@pytest.mark.parametrize("variant", VARIANTS)
def test_sample_target_matches_probabilities(variant):
    g = init_graph(1, variant)
    g.advance_to(12, rng(1))
    probs = g.attach_probs()
    r = rng(2)
    draws = np.array([g.sample_target(r) for _ in range(40_000)])
    counts = np.bincount(draws - 1, minlength=g.n)
    assert stats.chisquare(counts, probs * draws.size).pvalue > 1e-4
    # sampling does not mutate
    np.testing.assert_array_equal(g.attach_probs(), probs)


def test_sampler_index_prefix_search():
    w = [0.5, 0.0, 2.0, 1.0, 0.25]
    idx = SamplerIndex.from_weights(w)
    assert idx.total == pytest.approx(sum(w))
    cum = np.cumsum(w)
    for u in np.linspace(0, sum(w), 97, endpoint=False):
        assert idx.find(u) == int(np.searchsorted(cum, u, side="right")) + 1
    idx.update(2, 3.0)
    assert idx.query(2) == 3.0
    assert idx.total == pytest.approx(sum(w) + 3.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=40), st.floats(0.0, 1.0, exclude_max=True))
def test_sampler_index_never_returns_zero_weight(weights, frac):
    if sum(weights) == 0:
        return
    idx = SamplerIndex.from_weights(weights)
    j = idx.find(frac * idx.total)
    assert weights[j - 1] > 0


def test_grow_is_deterministic_per_stream():
    a = grow(500, 2, "inverse", rng(9), checkpoints=[10, 100, 500], tracked=[1, 50])
    b = grow(500, 2, "inverse", rng(9), checkpoints=[10, 100, 500], tracked=[1, 50])
    assert a == b
    c = grow(500, 2, "inverse", rng(10), checkpoints=[10, 100, 500], tracked=[1, 50])
    assert a != c


def test_grow_records():
    rec = grow(300, 1, "linear", rng(4), checkpoints=[5, 300], tracked=[1, 2, 100])
    assert rec.trajectory.shape == (2, 3)
    assert rec.trajectory[0, 2] == 0  # vertex 100 not yet born at n = 5
    for n, h in zip(rec.checkpoints, rec.histograms):
        assert h.sum() == n
        assert (np.arange(h.size) * h).sum() == 2 * n - 1
    assert len(rec.trajectory_rows()) == 2 + 3


def test_grow_validates_checkpoints():
    with pytest.raises(ValueError):
        grow(100, 1, "linear", rng(), checkpoints=[1, 50])
    with pytest.raises(ValueError):
        grow(100, 1, "linear", rng(), checkpoints=[200])
    with pytest.raises(ValueError):
        grow(100, 1, "linear", rng(), tracked=[0])


@pytest.mark.parametrize("m", [1, 2, 3])
def test_inverse_normalizer_bounds_and_drift(m):
    rec = grow(3000, m, "inverse", rng(m), checkpoints=[1000, 3000], record_normalizers=True)
    assert rec.normalizer_bounds_hold
    lo, hi = rec.normalizer_ratio
    assert 1.0 <= lo <= hi <= 2.0
    assert rec.max_weight_drift < 1e-12
    # D_{n+1,k} recorded before each half-edge, n from 2
    assert rec.normalizers.size == (3000 - 2) * m
    assert rec.normalizers[0] == pytest.approx(1 / (2 * m) + 1 / m)


def test_batch_sequences_conserve_degree():
    seqs = sample_degree_sequences(6, 2, "linear", 500, rng(5))
    assert seqs.shape == (500, 6)
    assert np.all(seqs.sum(axis=1) == 2 * (2 * 6 - 1))
    assert np.all(seqs[:, -1] == 2)


def test_batch_matches_exact_law_at_n3():
    # from (2, 1): vertex 1 receives with prob 1/3
    seqs = sample_degree_sequences(3, 1, "linear", 60_000, rng(6))
    frac = np.mean(seqs[:, 0] == 3)
    assert abs(frac - 1 / 3) < 4 * math.sqrt(2 / 9 / 60_000)


def test_corrupt_sampler_prefers_high_degree():
    good = sample_degree_sequences(3, 1, "inverse", 20_000, rng(7))
    bad = sample_degree_sequences(3, 1, "inverse", 20_000, rng(7), corrupt=True)
    # weights d_j give vertex 1 probability 2/3 instead of 1/3
    assert np.mean(bad[:, 0] == 3) > 0.6 > 0.4 > np.mean(good[:, 0] == 3)


def test_capacity_growth_preserves_state():
    g = GraphState(1, "inverse", capacity=2)
    g.advance_to(70, rng(8))
    assert g.capacity >= 70
    assert g.inverse_weight_sum == pytest.approx(g.recomputed_inverse_weight_sum(), rel=1e-12)
    copy = g.copy()
    copy.add_vertex(rng(1))
    assert g.n == 70 and copy.n == 71
