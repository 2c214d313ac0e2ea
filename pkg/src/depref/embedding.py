"""Continuous-time embeddings of the inverse model.

Every vertex carries an independent pure birth process that jumps from k to
k + 1 at rate 1/k. Vertex 1's process starts alone at time 0 with count m;
each time the processes alive have produced m further births between them a
new process is started with count m. Sampled at those start times ``tau_n``
the counts have the law of the inverse-model degree sequence. For m = 1 the
births are the children of a Crump-Mode-Jagers tree.

Events are generated by superposition: with per-vertex counts d_j the next
birth comes after an Exp(sum_j 1/d_j) wait and falls on vertex j with
probability proportional to 1/d_j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .graph import REBUILD_INTERVAL, _INVERSE, _capacity_for, _reload_tree, _tree_find, _tree_set

__all__ = [
    "BirthProcessPath",
    "EmbeddingState",
    "NormalizerSequence",
    "BoundViolation",
    "simulate_birth_process",
    "sample_jump_times",
    "simulate_embedding",
    "sample_embedded_degree_sequences",
    "c_n_sequence",
]


class BoundViolation(AssertionError):
    """A deterministic normalizer bound failed; indicates a simulation bug."""


@dataclass
class BirthProcessPath:
    """Path of one pure birth process with rates 1/k from initial count m.

    ``jump_times[0] = 0`` is the start; ``jump_times[n]`` is when the count
    first reaches ``m + n``. Only jumps up to ``horizon`` are kept.
    """

    m: int
    jump_times: np.ndarray
    horizon: float

    @property
    def holding_times(self) -> np.ndarray:
        return np.diff(self.jump_times)

    def count(self, t: float | np.ndarray) -> int | np.ndarray:
        if np.any(np.asarray(t) > self.horizon):
            raise ValueError("path not simulated beyond its horizon")
        c = self.m + np.searchsorted(self.jump_times, t, side="right") - 1
        return int(c) if np.ndim(c) == 0 else c


def simulate_birth_process(m: int, horizon: float, rng: np.random.Generator) -> BirthProcessPath:
    """Jump times of a rate-1/k birth process up to ``horizon``.

    Holding time L_n (count m+n-1 -> m+n) is exponential with mean m+n-1.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    times = [np.zeros(1)]
    t = 0.0
    drawn = 0
    # about sqrt(2 t) jumps are needed by time t
    chunk = max(16, int(np.sqrt(2.0 * horizon)) + 8)
    while t <= horizon:
        means = m + drawn + np.arange(chunk, dtype=np.float64)
        cum = t + np.cumsum(rng.standard_exponential(chunk) * means)
        times.append(cum)
        drawn += chunk
        t = cum[-1]
        chunk = max(16, chunk // 2)
    jt = np.concatenate(times)
    return BirthProcessPath(m=m, jump_times=jt[jt <= horizon], horizon=float(horizon))


def sample_jump_times(m: int, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``(size, n)`` array of T_1 = 0, T_2, ..., T_n for independent paths."""
    if n < 1:
        raise ValueError("n must be >= 1")
    means = m + np.arange(n - 1, dtype=np.float64)
    gaps = rng.standard_exponential((size, n - 1)) * means
    out = np.zeros((size, n))
    np.cumsum(gaps, axis=1, out=out[:, 1:])
    return out


@numba.njit(cache=True)
def _embed_kernel(deg, tree, cap, m, n_target, rng, ev_time, ev_vertex, ev_rate, tau):
    deg[0] = m
    _reload_tree(tree, cap, deg, 1, _INVERSE)
    tau[0] = 0.0
    t = 0.0
    n = 1
    e = 0
    since = 0
    while n < n_target:
        for _ in range(m):
            if since >= REBUILD_INTERVAL:
                _reload_tree(tree, cap, deg, n, _INVERSE)
                since = 0
            rate = tree[1]
            t += rng.standard_exponential() / rate
            j = _tree_find(tree, cap, rng.random() * rate)
            deg[j] += 1
            _tree_set(tree, cap, j, 1.0 / deg[j])
            ev_time[e] = t
            ev_vertex[e] = j
            ev_rate[e] = rate
            e += 1
            since += 1
        deg[n] = m
        _tree_set(tree, cap, n, 1.0 / m)
        tau[n] = t
        n += 1


@numba.njit(cache=True)
def _embed_batch_kernel(n_target, m, size, rng, out):
    cap = 1
    while cap < n_target:
        cap <<= 1
    deg = np.zeros(cap, dtype=np.int64)
    tree = np.zeros(2 * cap, dtype=np.float64)
    for r in range(size):
        deg[:] = 0
        deg[0] = m
        _reload_tree(tree, cap, deg, 1, _INVERSE)
        n = 1
        while n < n_target:
            for _ in range(m):
                rate = tree[1]
                # the waiting time is irrelevant to the sampled sequence but is
                # drawn to keep the stream identical to the single-path kernel
                rng.standard_exponential()
                j = _tree_find(tree, cap, rng.random() * rate)
                deg[j] += 1
                _tree_set(tree, cap, j, 1.0 / deg[j])
            deg[n] = m
            _tree_set(tree, cap, n, 1.0 / m)
            n += 1
        out[r, :] = deg[:n_target]


@dataclass
class EmbeddingState:
    """Event log of one embedded run up to ``tau_n``.

    Event e (0-based) happens at ``event_time[e]`` on ``event_vertex[e]``
    (1-based); ``event_rate[e]`` is the total rate D~ in force just before it.
    Events ``(n-1)m .. nm-1`` make up the interval (tau_n, tau_{n+1}].
    """

    m: int
    n: int
    tau: np.ndarray
    counts: np.ndarray
    event_time: np.ndarray
    event_vertex: np.ndarray
    event_rate: np.ndarray

    @property
    def event_gaps(self) -> np.ndarray:
        return np.diff(self.event_time, prepend=0.0)

    def _check_n(self, n: int) -> None:
        if not 1 <= n <= self.n:
            raise IndexError(f"n={n} outside 1..{self.n}")

    def intermediate_counts(self, n: int, k: int) -> np.ndarray:
        """Counts d~_j(n+1, k) of processes 1..n after k births past tau_n."""
        self._check_n(n)
        if not 0 <= k < self.m:
            raise IndexError(f"k={k} outside 0..{self.m - 1}")
        e = (n - 1) * self.m + k
        if e > self.event_vertex.size:
            raise IndexError("not simulated that far")
        return self.m + np.bincount(self.event_vertex[:e] - 1, minlength=n)[:n]

    def degrees_at(self, n: int) -> np.ndarray:
        """Counts of processes 1..n at tau_n."""
        self._check_n(n)
        return self.m + np.bincount(self.event_vertex[:(n - 1) * self.m] - 1, minlength=n)[:n]

    def d_tilde(self, n: int) -> float:
        """D~_n = sum_j 1/d~_j at tau_n."""
        return float(np.sum(1.0 / self.degrees_at(n)))

    def process_path(self, j: int) -> BirthProcessPath:
        """Birth process of vertex j, in its own clock (started at tau_j)."""
        self._check_n(j)
        births = self.event_time[self.event_vertex == j] - self.tau[j - 1]
        horizon = self.tau[-1] - self.tau[j - 1]
        return BirthProcessPath(self.m, np.concatenate([[0.0], births]), float(max(horizon, 0.0)))

    @property
    def parents(self) -> np.ndarray:
        """CMJ parent of vertices 2..n (m = 1 only): ``parents[v - 2]``."""
        if self.m != 1:
            raise ValueError("parent pointers are only defined for m = 1")
        return self.event_vertex.copy()


def simulate_embedding(n_target: int, m: int, rng: np.random.Generator) -> EmbeddingState:
    """Run the embedded birth processes until ``n_target`` processes exist."""
    if n_target < 2:
        raise ValueError(f"n_target must be >= 2, got {n_target}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    cap = _capacity_for(n_target)
    deg = np.zeros(cap, dtype=np.int64)
    tree = np.zeros(2 * cap, dtype=np.float64)
    n_events = m * (n_target - 1)
    ev_time = np.empty(n_events)
    ev_vertex = np.empty(n_events, dtype=np.int64)
    ev_rate = np.empty(n_events)
    tau = np.empty(n_target)
    _embed_kernel(deg, tree, cap, m, n_target, rng, ev_time, ev_vertex, ev_rate, tau)
    return EmbeddingState(
        m=m,
        n=n_target,
        tau=tau,
        counts=deg[:n_target].copy(),
        event_time=ev_time,
        event_vertex=ev_vertex + 1,
        event_rate=ev_rate,
    )


def sample_embedded_degree_sequences(n_target: int, m: int, size: int,
                                     rng: np.random.Generator) -> np.ndarray:
    """Counts at tau_{n_target} for ``size`` independent embedded runs."""
    if n_target < 2:
        raise ValueError(f"n_target must be >= 2, got {n_target}")
    out = np.zeros((size, n_target), dtype=np.int64)
    _embed_batch_kernel(n_target, m, size, rng, out)
    return out


@dataclass
class NormalizerSequence:
    """b_n = sum_k 1/D~_{n+1,k} (expected length of (tau_n, tau_{n+1}]) and partial sums.

    ``b[n - 1]`` holds b_n for n = 1..N-1; ``c[n - i]`` holds
    c_n = b_i + ... + b_n for n = i..N-1.
    """

    m: int
    i: int
    b: np.ndarray
    c: np.ndarray

    def b_at(self, n: int) -> float:
        return float(self.b[n - 1])

    def c_at(self, n: int) -> float:
        return float(self.c[n - self.i])

    def bounds_hold(self) -> bool:
        n = np.arange(1, self.b.size + 1, dtype=np.float64)
        m2 = self.m * self.m
        return bool(np.all(m2 / n <= self.b) and np.all(self.b <= 2 * m2 / n))


def c_n_sequence(state: EmbeddingState, i: int = 1, *, check: bool = True) -> NormalizerSequence:
    """Realized b_n and c_n from an embedding run.

    With ``check`` the deterministic bounds m^2/n <= b_n <= 2 m^2/n are
    asserted for every n.
    """
    if not 1 <= i < state.n:
        raise ValueError(f"i must lie in 1..{state.n - 1}")
    b = (1.0 / state.event_rate).reshape(state.n - 1, state.m).sum(axis=1)
    seq = NormalizerSequence(m=state.m, i=i, b=b, c=np.cumsum(b[i - 1:]))
    if check and not seq.bounds_hold():
        raise BoundViolation("b_n left [m^2/n, 2 m^2/n]")
    return seq
