"""Estimators and goodness-of-fit tests used by the harness."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from ..oracles import ExactModelDistribution

__all__ = [
    "MeanEstimate",
    "ChiSquareResult",
    "mean_estimate",
    "variance_se",
    "ks_normal",
    "total_variation",
    "count_sequences",
    "chi_square_against",
]

# cells with smaller expected counts are pooled before the chi-square test
MIN_CELL_EXPECTED = 5.0


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    se: float
    variance: float
    variance_se: float
    size: int


def variance_se(x: np.ndarray) -> float:
    """Standard error of the unbiased sample variance (no normality assumed)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 4:
        return math.inf
    c = x - x.mean()
    m2 = np.mean(c * c)
    m4 = np.mean(c ** 4)
    v = (m4 - m2 * m2 * (n - 3) / (n - 1)) / n
    return math.sqrt(max(v, 0.0))


def mean_estimate(x: np.ndarray) -> MeanEstimate:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    var = float(x.var(ddof=1)) if n > 1 else 0.0
    se = math.sqrt(var / n) if n > 1 else math.inf
    return MeanEstimate(float(x.mean()), se, var, variance_se(x), n)


def ks_normal(x: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance from the sample to N(0, 1)."""
    return float(stats.kstest(np.asarray(x, dtype=np.float64), "norm").statistic)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """TV distance between two pmfs on 0..K; the shorter one is zero-padded."""
    size = max(p.size, q.size)
    a = np.zeros(size)
    b = np.zeros(size)
    a[:p.size] = p
    b[:q.size] = q
    return 0.5 * float(np.abs(a - b).sum())


def count_sequences(samples: np.ndarray) -> dict[tuple[int, ...], int]:
    """Frequency of each row of an integer array."""
    rows, counts = np.unique(samples, axis=0, return_counts=True)
    return {tuple(int(v) for v in row): int(c) for row, c in zip(rows, counts)}


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    n: int
    # samples that landed on a sequence of probability zero
    outside_support: int
    cells: int


def chi_square_against(counts: dict[tuple[int, ...], int], exact: ExactModelDistribution) -> ChiSquareResult:
    """Pearson goodness-of-fit of observed sequence counts to an exact law.

    Cells expected below :data:`MIN_CELL_EXPECTED` are pooled. Any mass on a
    zero-probability sequence is decisive, so the p-value is then 0.
    """
    total = sum(counts.values())
    if total == 0:
        raise ValueError("no samples")
    support = exact.items()
    outside = sum(c for seq, c in counts.items() if seq not in exact.support)
    obs = np.array([counts.get(seq, 0) for seq, _ in support], dtype=np.float64)
    exp = np.array([float(p * total) for _, p in support])
    small = exp < MIN_CELL_EXPECTED
    if small.any():
        obs = np.append(obs[~small], obs[small].sum())
        exp = np.append(exp[~small], exp[small].sum())
    if outside:
        return ChiSquareResult(math.inf, exp.size - 1, 0.0, total, outside, exp.size)
    if exp.size < 2:
        return ChiSquareResult(0.0, 0, 1.0, total, 0, exp.size)
    # rescale to guard against rounding in float(p * total)
    exp *= obs.sum() / exp.sum()
    res = stats.chisquare(obs, exp)
    return ChiSquareResult(float(res.statistic), exp.size - 1, float(res.pvalue), total, 0, exp.size)


def exact_probability(exact: ExactModelDistribution, seq: tuple[int, ...]) -> Fraction:
    return exact.support.get(seq, Fraction(0))
