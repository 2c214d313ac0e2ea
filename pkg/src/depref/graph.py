"""Growing de-preferential attachment multigraphs.

Only vertex degrees are stored. A vertex's degree counts every edge endpoint
at it, including the dangling half-edges of the initial configuration, so the
existing vertices of ``G_n`` carry ``m(2n - 1)`` endpoints in total.

Hot loops are JIT-compiled with numba. The kernels take a
``numpy.random.Generator`` directly so that Python-level stepping and bulk
growth consume the same stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numba
import numpy as np

__all__ = [
    "ModelVariant",
    "SamplerIndex",
    "GraphState",
    "GrowthRecord",
    "SamplerFault",
    "init_graph",
    "grow",
    "sample_degree_sequences",
    "MAX_REJECTIONS",
    "REBUILD_INTERVAL",
]

MAX_REJECTIONS = 1_000_000
REBUILD_INTERVAL = 1 << 16

_LINEAR = 0
_INVERSE = 1
# Weights d_j instead of 1/d_j. Only used as a negative control for the
# goodness-of-fit machinery.
_CORRUPT = 2


class ModelVariant(str, Enum):
    LINEAR = "linear"
    INVERSE = "inverse"

    @property
    def code(self) -> int:
        return _LINEAR if self is ModelVariant.LINEAR else _INVERSE


def _variant(v: ModelVariant | str) -> ModelVariant:
    return v if isinstance(v, ModelVariant) else ModelVariant(str(v).lower())


class SamplerFault(RuntimeError):
    """Rejection sampling exceeded its retry cap; the state is corrupted."""


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _tree_set(tree, cap, idx, w):
    pos = idx + cap
    tree[pos] = w
    pos >>= 1
    while pos >= 1:
        tree[pos] = tree[2 * pos] + tree[2 * pos + 1]
        pos >>= 1


@numba.njit(cache=True)
def _tree_build(tree, cap):
    for pos in range(cap - 1, 0, -1):
        tree[pos] = tree[2 * pos] + tree[2 * pos + 1]


@numba.njit(cache=True)
def _tree_find(tree, cap, u):
    # Descends only into subtrees of positive weight, so rounding in ``u``
    # can never select an empty leaf.
    pos = 1
    while pos < cap:
        left = tree[2 * pos]
        if u < left or tree[2 * pos + 1] <= 0.0:
            pos = 2 * pos
        else:
            u -= left
            pos = 2 * pos + 1
    return pos - cap


@numba.njit(cache=True)
def _weight(d, variant):
    if variant == _CORRUPT:
        return float(d)
    return 1.0 / d


@numba.njit(cache=True)
def _reload_tree(tree, cap, deg, n, variant):
    tree[:] = 0.0
    for j in range(n):
        tree[cap + j] = _weight(deg[j], variant)
    _tree_build(tree, cap)


@numba.njit(cache=True)
def _sample(deg, tree, cap, n, k, m, variant, rng):
    """Index (0-based) of the vertex receiving the next half-edge, -1 on fault."""
    if variant == _LINEAR:
        denom = k + m * (2 * n - 1)
        for _ in range(MAX_REJECTIONS):
            j = rng.integers(0, n)
            if rng.random() * denom < denom - deg[j]:
                return j
        return -1
    return _tree_find(tree, cap, rng.random() * tree[1])


@numba.njit(cache=True)
def _attach(deg, tree, cap, n, k, m, variant, rng):
    j = _sample(deg, tree, cap, n, k, m, variant, rng)
    if j < 0:
        return j
    deg[j] += 1
    if variant != _LINEAR:
        _tree_set(tree, cap, j, _weight(deg[j], variant))
    return j


@numba.njit(cache=True)
def _grow_kernel(deg, tree, cap, n, m, variant, n_stop, rng, since_rebuild,
                 norm_out, norm_pos, ratio):
    """Add vertices until ``n == n_stop``.

    ``ratio`` holds the running (min, max) of ``n C / m`` where ``C = 1/D`` is
    the inverse-model normalizer; both must stay inside [1, 2].
    Returns (n, since_rebuild, norm_pos, status).
    """
    record = norm_out.shape[0] > 0
    while n < n_stop:
        for k in range(m):
            if variant != _LINEAR:
                if since_rebuild >= REBUILD_INTERVAL:
                    _reload_tree(tree, cap, deg, n, variant)
                    since_rebuild = 0
                total = tree[1]
                r = n / (m * total)
                if r < ratio[0]:
                    ratio[0] = r
                if r > ratio[1]:
                    ratio[1] = r
                if record:
                    norm_out[norm_pos] = total
                    norm_pos += 1
            j = _attach(deg, tree, cap, n, k, m, variant, rng)
            if j < 0:
                return n, since_rebuild, norm_pos, -1
            since_rebuild += 1
        deg[n] = m
        if variant != _LINEAR:
            _tree_set(tree, cap, n, _weight(m, variant))
        n += 1
    return n, since_rebuild, norm_pos, 0


@numba.njit(cache=True)
def _batch_kernel(n_target, m, variant, size, rng, out):
    cap = 1
    while cap < n_target:
        cap <<= 1
    deg = np.zeros(cap, dtype=np.int64)
    tree = np.zeros(2 * cap, dtype=np.float64)
    for r in range(size):
        deg[:] = 0
        deg[0] = 2 * m
        deg[1] = m
        if variant != _LINEAR:
            _reload_tree(tree, cap, deg, 2, variant)
        n = 2
        while n < n_target:
            for k in range(m):
                if _attach(deg, tree, cap, n, k, m, variant, rng) < 0:
                    return -1
            deg[n] = m
            if variant != _LINEAR:
                _tree_set(tree, cap, n, _weight(m, variant))
            n += 1
        out[r, :] = deg[:n_target]
    return 0


# ---------------------------------------------------------------------------
# Python surface
# ---------------------------------------------------------------------------


def _capacity_for(n: int) -> int:
    cap = 2
    while cap < n:
        cap <<= 1
    return cap


class SamplerIndex:
    """Sum tree over per-vertex weights with O(log n) update and inversion.

    Leaves hold the weights exactly; every internal node is recomputed from its
    two children on update, so the root never accumulates incremental drift.
    Vertex ids are 1-based.
    """

    def __init__(self, capacity: int):
        self.capacity = _capacity_for(capacity)
        self.tree = np.zeros(2 * self.capacity, dtype=np.float64)

    @classmethod
    def from_weights(cls, weights: Sequence[float], capacity: int | None = None) -> "SamplerIndex":
        weights = np.asarray(weights, dtype=np.float64)
        index = cls(max(capacity or 0, len(weights)))
        index.tree[index.capacity:index.capacity + len(weights)] = weights
        _tree_build(index.tree, index.capacity)
        return index

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def update(self, j: int, w: float) -> None:
        if not 1 <= j <= self.capacity:
            raise IndexError(f"vertex {j} outside index capacity {self.capacity}")
        _tree_set(self.tree, self.capacity, j - 1, float(w))

    def query(self, j: int) -> float:
        if not 1 <= j <= self.capacity:
            raise IndexError(f"vertex {j} outside index capacity {self.capacity}")
        return float(self.tree[self.capacity + j - 1])

    def find(self, u: float) -> int:
        """Vertex whose cumulative-weight interval contains ``u`` in [0, total)."""
        return int(_tree_find(self.tree, self.capacity, float(u))) + 1


class GraphState:
    """Degrees and running totals of one growing multigraph.

    ``n`` is the number of existing vertices; ``k`` is the number of
    half-edges of the incoming vertex ``v_{n+1}`` already attached.
    """

    def __init__(self, m: int, variant: ModelVariant | str, capacity: int = 16):
        if m < 1:
            raise ValueError(f"m must be a positive integer, got {m}")
        self.m = int(m)
        self.variant = _variant(variant)
        self.n = 2
        self.k = 0
        cap = _capacity_for(max(capacity, 2))
        self._deg = np.zeros(cap, dtype=np.int64)
        self._deg[0] = 2 * m
        self._deg[1] = m
        self.total_degree_existing = 3 * m
        self._tree = np.zeros(2 * cap, dtype=np.float64)
        self._since_rebuild = 0
        if self.variant is ModelVariant.INVERSE:
            _reload_tree(self._tree, cap, self._deg, self.n, _INVERSE)

    # -- storage -----------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self._deg.shape[0]

    def reserve(self, n: int) -> None:
        """Make room for ``n`` vertices."""
        if n <= self.capacity:
            return
        cap = _capacity_for(n)
        deg = np.zeros(cap, dtype=np.int64)
        deg[:self.n] = self._deg[:self.n]
        self._deg = deg
        self._tree = np.zeros(2 * cap, dtype=np.float64)
        self.refresh()

    def refresh(self) -> None:
        """Rebuild the sampler index from the degree vector."""
        if self.variant is ModelVariant.INVERSE:
            _reload_tree(self._tree, self.capacity, self._deg, self.n, _INVERSE)
        self._since_rebuild = 0

    @property
    def degrees(self) -> np.ndarray:
        """Copy of d_1..d_n (position 0 holds vertex 1)."""
        return self._deg[:self.n].copy()

    def degree(self, j: int) -> int:
        self._check_vertex(j)
        return int(self._deg[j - 1])

    @property
    def sampler_index(self) -> SamplerIndex | None:
        if self.variant is not ModelVariant.INVERSE:
            return None
        index = SamplerIndex.__new__(SamplerIndex)
        index.capacity = self.capacity
        index.tree = self._tree
        return index

    @property
    def inverse_weight_sum(self) -> float:
        """D_{n+1,k}: the maintained sum of 1/d_j over existing vertices."""
        if self.variant is ModelVariant.INVERSE:
            return float(self._tree[1])
        return self.recomputed_inverse_weight_sum()

    def recomputed_inverse_weight_sum(self) -> float:
        return math.fsum(1.0 / self._deg[:self.n])

    # -- probabilities and sampling ----------------------------------------

    def _check_vertex(self, j: int) -> None:
        if not 1 <= j <= self.n:
            raise IndexError(f"vertex {j} not in 1..{self.n}")

    def attach_prob(self, j: int) -> float:
        """Probability that the next half-edge of v_{n+1} lands on vertex ``j``."""
        self._check_vertex(j)
        d = self._deg[j - 1]
        if self.variant is ModelVariant.LINEAR:
            denom = self.k + self.m * (2 * self.n - 1)
            return (1.0 - d / denom) / (self.n - 1)
        return (1.0 / d) / self.inverse_weight_sum

    def attach_probs(self) -> np.ndarray:
        d = self._deg[:self.n].astype(np.float64)
        if self.variant is ModelVariant.LINEAR:
            denom = self.k + self.m * (2 * self.n - 1)
            return (1.0 - d / denom) / (self.n - 1)
        return (1.0 / d) / self.inverse_weight_sum

    def sample_target(self, rng: np.random.Generator) -> int:
        """Draw the next attachment target without modifying the state."""
        j = _sample(self._deg, self._tree, self.capacity, self.n, self.k, self.m,
                    self.variant.code, rng)
        if j < 0:
            raise SamplerFault(f"rejection sampling exceeded {MAX_REJECTIONS} rounds")
        return int(j) + 1

    def attach_half_edge(self, rng: np.random.Generator) -> "GraphState":
        if self.k >= self.m:
            raise RuntimeError("all half-edges of the incoming vertex are attached")
        if self.variant is ModelVariant.INVERSE and self._since_rebuild >= REBUILD_INTERVAL:
            self.refresh()
        j = _attach(self._deg, self._tree, self.capacity, self.n, self.k, self.m,
                    self.variant.code, rng)
        if j < 0:
            raise SamplerFault(f"rejection sampling exceeded {MAX_REJECTIONS} rounds")
        self.k += 1
        self.total_degree_existing += 1
        self._since_rebuild += 1
        return self

    def add_vertex(self, rng: np.random.Generator) -> "GraphState":
        if self.k != 0:
            raise RuntimeError("add_vertex called in the middle of an attachment step")
        for _ in range(self.m):
            self.attach_half_edge(rng)
        self.reserve(self.n + 1)
        self._deg[self.n] = self.m
        if self.variant is ModelVariant.INVERSE:
            _tree_set(self._tree, self.capacity, self.n, 1.0 / self.m)
        self.n += 1
        self.k = 0
        self.total_degree_existing += self.m
        return self

    def advance_to(self, n_stop: int, rng: np.random.Generator, *,
                   normalizers: np.ndarray | None = None,
                   ratio: np.ndarray | None = None) -> None:
        """Grow to ``n_stop`` vertices in compiled code.

        ``normalizers``, if given, receives D_{n+1,k} before every half-edge.
        ``ratio`` accumulates the running (min, max) of n C_{n+1,k} / m.
        """
        if self.k != 0:
            raise RuntimeError("advance_to requires a step boundary (k = 0)")
        if n_stop <= self.n:
            return
        self.reserve(n_stop)
        steps = (n_stop - self.n) * self.m
        if normalizers is None:
            normalizers = np.empty(0, dtype=np.float64)
        elif normalizers.shape[0] < steps:
            raise ValueError("normalizer buffer too small")
        if ratio is None:
            ratio = np.array([np.inf, -np.inf])
        n, since, _, status = _grow_kernel(
            self._deg, self._tree, self.capacity, self.n, self.m, self.variant.code,
            n_stop, rng, self._since_rebuild, normalizers, 0, ratio)
        if status < 0:
            raise SamplerFault(f"rejection sampling exceeded {MAX_REJECTIONS} rounds")
        self.total_degree_existing += (n - self.n) * 2 * self.m
        self.n = n
        self._since_rebuild = since

    def histogram(self) -> np.ndarray:
        """``h[k]`` = number of vertices of degree k (``h[0] == 0``)."""
        return np.bincount(self._deg[:self.n])

    def copy(self) -> "GraphState":
        other = GraphState.__new__(GraphState)
        other.__dict__.update(self.__dict__)
        other._deg = self._deg.copy()
        other._tree = self._tree.copy()
        return other


def init_graph(m: int, variant: ModelVariant | str, capacity: int = 16) -> GraphState:
    """Initial configuration: v_1 and v_2 joined by m edges, m free half-edges at v_1."""
    return GraphState(m, variant, capacity=capacity)


# ---------------------------------------------------------------------------
# bulk growth
# ---------------------------------------------------------------------------


@dataclass
class GrowthRecord:
    variant: ModelVariant
    m: int
    n_target: int
    checkpoints: tuple[int, ...]
    tracked: tuple[int, ...]
    # trajectory[c, t]: degree of tracked[t] at checkpoints[c]; 0 if not yet born
    trajectory: np.ndarray
    histograms: list[np.ndarray]
    normalizers: np.ndarray | None = None
    normalizer_ratio: tuple[float, float] | None = None
    max_weight_drift: float = 0.0
    probe_degrees: np.ndarray | None = None
    final_degrees: np.ndarray | None = field(default=None, repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrowthRecord):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b)

        return (
            self.variant == other.variant and self.m == other.m
            and self.n_target == other.n_target
            and self.checkpoints == other.checkpoints and self.tracked == other.tracked
            and same(self.trajectory, other.trajectory)
            and len(self.histograms) == len(other.histograms)
            and all(np.array_equal(a, b) for a, b in zip(self.histograms, other.histograms))
            and same(self.normalizers, other.normalizers)
            and self.normalizer_ratio == other.normalizer_ratio
            and self.max_weight_drift == other.max_weight_drift
            and same(self.probe_degrees, other.probe_degrees)
            and same(self.final_degrees, other.final_degrees)
        )

    @property
    def normalizer_bounds_hold(self) -> bool | None:
        """Whether m/n <= C_{n+1,k} <= 2m/n held at every recorded step."""
        if self.normalizer_ratio is None:
            return None
        lo, hi = self.normalizer_ratio
        if lo > hi:  # no steps taken
            return True
        return 1.0 <= lo and hi <= 2.0

    def trajectory_rows(self, replicate: int = 0) -> list[tuple[int, int, int, int]]:
        rows = []
        for c, n in enumerate(self.checkpoints):
            for t, v in enumerate(self.tracked):
                if v <= n:
                    rows.append((replicate, n, v, int(self.trajectory[c, t])))
        return rows

    def histogram_rows(self, replicate: int = 0) -> list[tuple[int, int, int, int]]:
        rows = []
        for n, h in zip(self.checkpoints, self.histograms):
            for k in np.flatnonzero(h):
                rows.append((replicate, n, int(k), int(h[k])))
        return rows


def grow(
    n_target: int,
    m: int,
    variant: ModelVariant | str,
    rng: np.random.Generator,
    *,
    checkpoints: Iterable[int] | None = None,
    tracked: Iterable[int] = (1,),
    record_normalizers: bool = False,
    probe: bool = False,
    keep_final: bool = False,
) -> GrowthRecord:
    """Grow from the initial configuration to ``n_target`` vertices.

    At every checkpoint the degrees of ``tracked`` vertices and the degree
    histogram are recorded, and for the inverse model the maintained weight sum
    is compared against a fresh recomputation before the index is rebuilt.
    With ``probe`` an extra target is drawn at each checkpoint (without
    attaching it) and its degree stored; this feeds indicator-count estimators.
    """
    if n_target < 2:
        raise ValueError(f"n_target must be >= 2, got {n_target}")
    variant = _variant(variant)
    cps = sorted(set(checkpoints)) if checkpoints is not None else [n_target]
    if cps and (cps[0] < 2 or cps[-1] > n_target):
        raise ValueError(f"checkpoints must lie in [2, {n_target}], got {cps}")
    tracked = tuple(int(v) for v in tracked)
    if any(v < 1 for v in tracked):
        raise ValueError("tracked vertex ids are 1-based")

    state = init_graph(m, variant, capacity=n_target)
    inverse = variant is ModelVariant.INVERSE
    norms = np.empty((n_target - 2) * m, dtype=np.float64) if (record_normalizers and inverse) else None
    ratio = np.array([np.inf, -np.inf])
    traj = np.zeros((len(cps), len(tracked)), dtype=np.int64)
    hists = []
    probes = np.zeros(len(cps), dtype=np.int64) if probe else None
    drift = 0.0
    for c, n in enumerate(cps):
        if n > state.n:
            buf = norms[(state.n - 2) * m:] if norms is not None else None
            state.advance_to(n, rng, normalizers=buf, ratio=ratio)
        if inverse:
            fresh = state.recomputed_inverse_weight_sum()
            drift = max(drift, abs(state.inverse_weight_sum - fresh) / fresh)
            state.refresh()
        deg = state._deg
        for t, v in enumerate(tracked):
            traj[c, t] = deg[v - 1] if v <= state.n else 0
        hists.append(state.histogram())
        if probe:
            probes[c] = state.degree(state.sample_target(rng))
    return GrowthRecord(
        variant=variant,
        m=m,
        n_target=n_target,
        checkpoints=tuple(cps),
        tracked=tracked,
        trajectory=traj,
        histograms=hists,
        normalizers=norms,
        normalizer_ratio=(float(ratio[0]), float(ratio[1])) if inverse else None,
        max_weight_drift=drift,
        probe_degrees=probes,
        final_degrees=state.degrees if keep_final else None,
    )


def sample_degree_sequences(
    n_target: int,
    m: int,
    variant: ModelVariant | str,
    size: int,
    rng: np.random.Generator,
    *,
    corrupt: bool = False,
) -> np.ndarray:
    """Degree vectors of ``size`` independent graphs grown to ``n_target``.

    Uses the same compiled attachment step as :class:`GraphState`. With
    ``corrupt`` the inverse sampler uses weights d_j instead of 1/d_j.
    """
    if n_target < 2:
        raise ValueError(f"n_target must be >= 2, got {n_target}")
    code = _variant(variant).code
    if corrupt:
        code = _CORRUPT
    out = np.zeros((size, n_target), dtype=np.int64)
    if _batch_kernel(n_target, m, code, size, rng, out) < 0:
        raise SamplerFault(f"rejection sampling exceeded {MAX_REJECTIONS} rounds")
    return out
