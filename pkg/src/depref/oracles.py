"""Exact finite-n ground truth for Monte Carlo checks.

Three independent routes:

* the expectation recursion for a fixed vertex degree in the linear model,
  plus the accompanying variance bound;
* the recursion for expected degree counts E[N_k(n)] (linear, m = 1);
* brute-force enumeration of every attachment outcome for tiny graphs, in
  exact rational arithmetic, for either model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .graph import ModelVariant, _variant

__all__ = [
    "DegreeExpectationTable",
    "NkExpectationTable",
    "ExactModelDistribution",
    "expected_degree_linear",
    "variance_bound_linear",
    "expected_Nk_linear",
    "brute_force_model_distribution",
    "EXACT_UNTIL",
]

# Recursions are carried in exact rationals up to this n, floats beyond.
EXACT_UNTIL = 1000


def _entry(i: int) -> int:
    return 2 if i <= 2 else i


def _initial_degree(i: int, m: int, convention: str) -> int:
    if convention == "configuration":
        return 2 * m if i == 1 else m
    if convention == "generic":
        return m
    raise ValueError(f"unknown convention {convention!r}")


def _step_factors(n: int, m: int) -> list[Fraction]:
    # f_j = 1 - 1/((n-1)(j + m(2n-1))), j = 0..m-1
    return [1 - Fraction(1, (n - 1) * (j + m * (2 * n - 1))) for j in range(m)]


def _alpha_beta_exact(n: int, m: int) -> tuple[Fraction, Fraction]:
    f = _step_factors(n, m)
    alpha = math.prod(f, start=Fraction(1))
    beta = Fraction(1)
    for k in range(1, m):
        beta += math.prod(f[m - k:], start=Fraction(1))
    return alpha, beta


def _alpha_beta_float(ns: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    ns = ns.astype(np.float64)
    f = np.stack([1.0 - 1.0 / ((ns - 1) * (j + m * (2 * ns - 1))) for j in range(m)])
    alpha = np.prod(f, axis=0)
    beta = np.ones_like(ns)
    for k in range(1, m):
        beta += np.prod(f[m - k:], axis=0)
    return alpha, beta


@dataclass
class DegreeExpectationTable:
    """E[d_i(n)] and a variance upper bound for n = entry..n_target."""

    i: int
    m: int
    entry: int
    values: np.ndarray
    variance_bounds: np.ndarray
    exact: dict[int, Fraction] = field(repr=False)
    crossover_rel_error: float | None = None

    @property
    def n_target(self) -> int:
        return self.entry + self.values.size - 1

    def _pos(self, n: int) -> int:
        if not self.entry <= n <= self.n_target:
            raise IndexError(f"n={n} outside {self.entry}..{self.n_target}")
        return n - self.entry

    def mean(self, n: int) -> float:
        return float(self.values[self._pos(n)])

    def variance_bound(self, n: int) -> float:
        return float(self.variance_bounds[self._pos(n)])

    def rows(self, ns: Iterable[int] | None = None) -> list[tuple[int, int, float, float]]:
        ns = range(self.entry, self.n_target + 1) if ns is None else ns
        return [(n, self.i, self.mean(n), self.variance_bound(n)) for n in ns]


def variance_bound_linear(i: int, n_target: int, m: int) -> np.ndarray:
    """Upper bounds on Var[d_i(n)], n = entry..n_target.

    Each added vertex raises the variance by at most m/(n-1); the degree is
    deterministic at entry.
    """
    entry = _entry(i)
    if n_target < entry:
        raise ValueError(f"n_target={n_target} precedes the entry of vertex {i}")
    steps = np.arange(entry, n_target, dtype=np.float64)
    return np.concatenate([[0.0], np.cumsum(m / (steps - 1))])


def expected_degree_linear(
    i: int,
    n_target: int,
    m: int,
    *,
    convention: str = "configuration",
    exact_until: int = EXACT_UNTIL,
) -> DegreeExpectationTable:
    """Expected degree of vertex ``i`` in the linear model.

    Iterates ``a_{n+1} = alpha_n a_n + beta_n / (n - 1)``. Under the default
    ``"configuration"`` convention vertex 1 starts at 2m (the initial free
    half-edges); ``"generic"`` starts every vertex at m.
    """
    if i < 1 or m < 1:
        raise ValueError("i and m must be positive")
    entry = _entry(i)
    if n_target < entry:
        raise ValueError(f"n_target={n_target} precedes the entry of vertex {i}")
    a0 = _initial_degree(i, m, convention)

    ns = np.arange(entry, n_target, dtype=np.int64)
    alpha, beta = _alpha_beta_float(ns, m) if ns.size else (np.empty(0), np.empty(0))
    incr = beta / (ns - 1) if ns.size else np.empty(0)
    values = np.empty(n_target - entry + 1)
    values[0] = a0
    a = float(a0)
    for t in range(ns.size):
        a = alpha[t] * a + incr[t]
        values[t + 1] = a

    exact = {entry: Fraction(a0)}
    last = min(exact_until, n_target)
    ax = Fraction(a0)
    for n in range(entry, last):
        al, be = _alpha_beta_exact(n, m)
        ax = al * ax + be / (n - 1)
        exact[n + 1] = ax
    cross = None
    if last >= entry:
        cross = abs(values[last - entry] - float(exact[last])) / float(exact[last])

    return DegreeExpectationTable(
        i=i,
        m=m,
        entry=entry,
        values=values,
        variance_bounds=variance_bound_linear(i, n_target, m),
        exact=exact,
        crossover_rel_error=cross,
    )


@dataclass
class NkExpectationTable:
    """E[N_k(n)] for the linear model with m = 1.

    ``values[k]`` = E[N_k(n)] for k = 0..n at the final n (``values[0] = 0``);
    ``epsilon[k] = values[k] - n 2^-k``; ``max_abs_epsilon[n - 2]`` tracks
    ``max_k |eps_k(n)|`` along the whole recursion.
    """

    n: int
    values: np.ndarray
    epsilon: np.ndarray
    max_abs_epsilon: np.ndarray
    exact: list[Fraction] | None = field(default=None, repr=False)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    exact_snapshots: dict[int, list[Fraction]] = field(default_factory=dict, repr=False)
    crossover_rel_error: float | None = None

    def rows(self) -> list[tuple[int, int, float, float]]:
        return [(self.n, k, float(self.values[k]), float(self.epsilon[k]))
                for k in range(1, self.values.size)]


def _geometric(kmax: int) -> np.ndarray:
    p = np.ldexp(1.0, -np.arange(kmax + 1))
    p[0] = 0.0
    return p


def expected_Nk_linear(
    n_target: int,
    *,
    exact_until: int = EXACT_UNTIL,
    snapshots: Iterable[int] = (),
) -> NkExpectationTable:
    """Iterate the E[N_k(n)] recursion from N_1(2) = N_2(2) = 1.

    The rational track keeps integer numerators over a common denominator,
    which avoids a gcd per operation.
    """
    if n_target < 2:
        raise ValueError("n_target must be >= 2")
    snaps = set(snapshots)
    if any(not 2 <= s <= n_target for s in snaps):
        raise ValueError(f"snapshots must lie in [2, {n_target}]")
    exact_last = max(2, min(exact_until, n_target))
    snaps.add(exact_last)

    E = np.zeros(n_target + 2)
    E[1] = E[2] = 1.0
    num = [0, 1, 1]  # exact numerators over den
    den = 1
    max_eps = np.empty(n_target - 1)
    geo = _geometric(n_target + 1)

    out_snaps: dict[int, np.ndarray] = {}
    out_exact_snaps: dict[int, list[Fraction]] = {}
    k_all = np.arange(n_target + 2, dtype=np.float64)

    def record(n: int) -> None:
        max_eps[n - 2] = np.max(np.abs(E[:n + 1] - n * geo[:n + 1]))
        if n in snaps:
            out_snaps[n] = E[:n + 1].copy()
            if n <= exact_last:
                out_exact_snaps[n] = [Fraction(a, den) for a in num[:n + 1]]

    record(2)
    for n in range(2, n_target):
        q = (n - 1) * (2 * n - 1)
        kk = k_all[:n + 2]
        stay = 1.0 - (1.0 - kk / (2 * n - 1)) / (n - 1)
        move = (1.0 - (kk - 1) / (2 * n - 1)) / (n - 1)
        prev = E[:n + 2].copy()
        E[1:n + 2] = stay[1:] * prev[1:] + move[1:] * prev[:n + 1]
        E[1] += 1.0
        if n < exact_last:
            num.append(0)
            new = [0] * (n + 2)
            for k in range(1, n + 2):
                new[k] = (q - (2 * n - 1 - k)) * num[k] + (2 * n - k) * num[k - 1]
            new[1] += q * den
            num, den = new, den * q
            if n % 64 == 0:
                g = math.gcd(den, *num[1:])
                if g > 1:
                    num = [a // g for a in num]
                    den //= g
        record(n + 1)

    n = n_target
    values = E[:n + 1].copy()
    exact = [Fraction(a, den) for a in num] if n <= exact_last else None
    # both tracks coexist at exact_last, which is always snapshotted
    ref, fl = out_exact_snaps[exact_last], out_snaps[exact_last]
    # relative comparison is meaningless once values go subnormal (k near n)
    cross = max(abs(float(r) - f) / float(r) for r, f in zip(ref, fl) if float(r) > 1e-250)
    return NkExpectationTable(
        n=n,
        values=values,
        epsilon=values - n * geo[:n + 1],
        max_abs_epsilon=max_eps,
        exact=exact,
        snapshots=out_snaps,
        exact_snapshots=out_exact_snaps,
        crossover_rel_error=cross,
    )


@dataclass
class ExactModelDistribution:
    """Law of the labelled degree sequence (d_1, ..., d_n) of ``G_n``."""

    n: int
    m: int
    variant: ModelVariant
    support: dict[tuple[int, ...], Fraction]
    histories: int

    def total_probability(self) -> Fraction:
        return sum(self.support.values(), Fraction(0))

    def mean_degree(self, i: int) -> Fraction:
        return sum((p * seq[i - 1] for seq, p in self.support.items()), Fraction(0))

    def second_moment(self, i: int) -> Fraction:
        return sum((p * seq[i - 1] ** 2 for seq, p in self.support.items()), Fraction(0))

    def expected_counts(self) -> dict[int, Fraction]:
        """k -> E[N_k(n)]."""
        out: dict[int, Fraction] = {}
        for seq, p in self.support.items():
            for d in seq:
                out[d] = out.get(d, Fraction(0)) + p
        return dict(sorted(out.items()))

    def items(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return sorted(self.support.items())


def _history_count(n_target: int, m: int) -> int:
    return math.prod(n ** m for n in range(2, n_target))


def brute_force_model_distribution(
    n_target: int,
    m: int,
    variant: ModelVariant | str,
    *,
    max_histories: int = 100_000,
) -> ExactModelDistribution:
    """Enumerate every attachment outcome up to ``n_target`` vertices.

    States reached by different histories are merged, so the work is far below
    the history count, but the cap is applied to histories to keep the
    contract simple.
    """
    variant = _variant(variant)
    if n_target < 2 or m < 1:
        raise ValueError("need n_target >= 2 and m >= 1")
    histories = _history_count(n_target, m)
    if histories > max_histories:
        raise ValueError(
            f"{histories} attachment histories for n={n_target}, m={m} exceed the cap {max_histories}")

    dist: dict[tuple[int, ...], Fraction] = {(2 * m, m): Fraction(1)}
    for n in range(2, n_target):
        for k in range(m):
            nxt: dict[tuple[int, ...], Fraction] = {}
            for seq, p in dist.items():
                if variant is ModelVariant.LINEAR:
                    denom = k + m * (2 * n - 1)
                    probs = [Fraction(denom - d, denom * (n - 1)) for d in seq]
                else:
                    inv = [Fraction(1, d) for d in seq]
                    total = sum(inv, Fraction(0))
                    probs = [w / total for w in inv]
                for j, q in enumerate(probs):
                    if q == 0:
                        continue
                    new = seq[:j] + (seq[j] + 1,) + seq[j + 1:]
                    nxt[new] = nxt.get(new, Fraction(0)) + p * q
            dist = nxt
        dist = {seq + (m,): p for seq, p in dist.items()}
    return ExactModelDistribution(n=n_target, m=m, variant=variant, support=dist, histories=histories)
