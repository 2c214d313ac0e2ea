"""Acceptance suites.

Each criterion builds harness configs at a fixed seed, runs them and checks
the reported statistics against the thresholds in :mod:`.thresholds`.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ..embedding import sample_jump_times, simulate_birth_process
from ..graph import ModelVariant
from ..limits import LimitDistribution, inverse_tail, inverse_tail_gamma, limit_summary, rho_hat, solve_lambda_star
from ..oracles import brute_force_model_distribution, expected_degree_linear, expected_Nk_linear
from . import thresholds as th
from .config import ExperimentConfig
from .report import emit_report
from .runner import lambda_star_diagnostics, run_replicates
from .seeding import replicate_rng

__all__ = ["Check", "CriterionResult", "CRITERIA", "SUITES", "SUITE_SEED", "run_criterion", "run_suite"]

SUITE_SEED = 12345


@dataclass
class Check:
    label: str
    passed: bool
    value: Any = None


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list[Check]
    elapsed: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title} ({self.elapsed:.1f} s)"

    def lines(self) -> list[str]:
        out = [self.line()]
        for c in self.checks:
            out.append(f"    {'ok ' if c.passed else 'BAD'} {c.label}: {_fmt(c.value)}")
        return out

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "checks": [{"label": c.label, "passed": c.passed, "value": c.value} for c in self.checks]}


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _row(report, n: int, **match) -> dict:
    for r in report.summary["by_checkpoint"]:
        if r["n"] == n and all(r.get(k) == v for k, v in match.items()):
            return r
    raise KeyError(f"no summary row for n={n} {match}")


def _runtime(checks: list[Check], number: int, elapsed: float) -> None:
    limit = th.RUNTIME_LIMITS.get(number)
    if limit is not None:
        checks.append(Check(f"runtime < {limit:g} s", elapsed < limit, elapsed))


# ---------------------------------------------------------------------------


def criterion_1(seed: int, workers: int) -> list[Check]:
    checks = []
    means_ok, counts_ok, mass_ok = True, True, True
    for m in (1, 2):
        for n in range(2, 6):
            for variant in ModelVariant:
                exact = brute_force_model_distribution(n, m, variant)
                mass_ok &= exact.total_probability() == 1
                if variant is not ModelVariant.LINEAR:
                    continue
                for i in range(1, n + 1):
                    rec = expected_degree_linear(i, n, m, exact_until=n).exact[n]
                    means_ok &= exact.mean_degree(i) == rec
                if m == 1:
                    nk = expected_Nk_linear(n, exact_until=n).exact
                    got = exact.expected_counts()
                    counts_ok &= all(got.get(k, Fraction(0)) == nk[k] for k in range(1, n + 1))
    checks.append(Check("enumerated laws have total probability exactly 1", mass_ok))
    checks.append(Check("E[d_i(n)] recursion equals enumeration (n <= 5, m <= 2)", means_ok))
    checks.append(Check("E[N_k(n)] recursion equals enumeration (n <= 5, m = 1)", counts_ok))
    return checks


def criterion_2(seed: int, workers: int) -> list[Check]:
    cfg = ExperimentConfig(statistic="embedding_equiv", variant="inverse", m=1, n_target=4,
                           replicates=th.EQUIVALENCE_REPLICATES, master_seed=seed, workers=workers)
    s = run_replicates(cfg).summary
    return [
        Check(f"graph-core p-value > {th.CHI2_ALPHA:g}", s["graph"]["passed"], s["graph"]["p_value"]),
        Check(f"embedding p-value > {th.CHI2_ALPHA:g}", s["embedding"]["passed"], s["embedding"]["p_value"]),
        Check(f"corrupted sampler p-value < {th.NEGATIVE_CONTROL_ALPHA:g}", s["corrupt"]["rejected"],
              s["corrupt"]["p_value"]),
    ]


def criterion_3(seed: int, workers: int) -> list[Check]:
    checks = []
    for m in (1, 2, 3):
        cfg = ExperimentConfig(statistic="normalizer", variant="inverse", m=m, n_target=10_000,
                               replicates=10, master_seed=seed, workers=workers)
        rep = run_replicates(cfg)
        s = rep.summary
        checks.append(Check(f"m={m}: m/(n-1) <= C_{{n,k}} <= 2m/(n-1) at every step",
                            s["C_bounds_hold"], [s["C_ratio_min"], s["C_ratio_max"]]))
        checks.append(Check(f"m={m}: m^2/n <= b_n <= 2m^2/n at every n", s["b_bounds_hold"]))
        if m > 1:
            v = _row(rep, 10_000)["c_over_m2_log_n"]
            lo, hi = th.C_N_M2_RANGE
            checks.append(Check(f"m={m}: c_n/(m^2 log n) in [{lo}, {hi}] at n=1e4", lo <= v <= hi, v))
    return checks


def criterion_4(seed: int, workers: int) -> list[Check]:
    sol = solve_lambda_star()
    coarse = solve_lambda_star(series_tol=1e-12)
    lim = LimitDistribution(sol.lambda_star)
    p = lim.pmf_vector()
    k = np.arange(p.size)
    summ = limit_summary(sol.lambda_star)
    tail_err = max(abs(inverse_tail(n, sol.lambda_star) - inverse_tail_gamma(n, sol.lambda_star))
                   / inverse_tail(n, sol.lambda_star) for n in range(1, 31))
    rho1 = abs(rho_hat(1.0, 1e-16) - (math.e - 2))
    mass = abs(math.fsum(p) - 1)
    mean = abs(math.fsum(k * p) - 2)
    return [
        Check("|rho_hat(1) - (e - 2)| < 1e-12", rho1 < th.RHO_AT_ONE_TOL, rho1),
        Check("lambda* stable under series refinement", abs(sol.lambda_star - coarse.lambda_star)
              < th.LAMBDA_STABILITY_TOL, abs(sol.lambda_star - coarse.lambda_star)),
        Check("sum p_k = 1", mass < th.PMF_MASS_TOL, mass),
        Check("sum k p_k = 2", mean < th.PMF_MEAN_TOL, mean),
        Check("mode of p_k is 1", summ.mode == 1, summ.mode),
        Check("tail matches Gamma form for n <= 30", tail_err < th.TAIL_GAMMA_REL_TOL, tail_err),
    ]


def criterion_5(seed: int, workers: int) -> list[Check]:
    cfg = ExperimentConfig(statistic="degree_dist", variant="linear", m=1, n_target=10_000,
                           replicates=200, master_seed=seed, workers=workers)
    row = _row(run_replicates(cfg), 10_000)
    return [
        Check(f"max_k |P_k - 2^-k| < {th.LINEAR_PK_MAX_DEV}", row["max_abs_dev"] < th.LINEAR_PK_MAX_DEV,
              row["max_abs_dev"]),
        Check(f"max_k |P_k - E[N_k]/n| < {th.ORACLE_SE_MULT:g} SE", row["max_abs_oracle_z"] < th.ORACLE_SE_MULT,
              row["max_abs_oracle_z"]),
    ]


def criterion_6(seed: int, workers: int) -> list[Check]:
    cfg = ExperimentConfig(statistic="trajectory", variant="linear", m=1, n_target=1000,
                           tracked_vertices=(1,), replicates=10_000, master_seed=seed, workers=workers)
    row = _row(run_replicates(cfg), 1000, vertex=1)
    cps = (100, 1000, 10_000, 100_000)
    long = ExperimentConfig(statistic="trajectory", variant="linear", m=1, n_target=100_000,
                            checkpoints=cps, tracked_vertices=(1,), replicates=1000,
                            master_seed=seed, workers=workers)
    rep = run_replicates(long)
    ratios = [_row(rep, n, vertex=1)["ratio_mean"] for n in cps]
    gaps = [abs(r - 1) for r in ratios]
    oracle = expected_degree_linear(1, 100_000, 1, exact_until=0)
    oracle_ratios = [oracle.mean(n) / math.log(n) for n in cps]
    return [
        Check(f"mean d_1(1000) within {th.ORACLE_SE_MULT:g} SE of recursion",
              abs(row["oracle_z"]) < th.ORACLE_SE_MULT, row["oracle_z"]),
        Check("sample variance <= bound + 4 variance SE", row["variance_ok"],
              [row["variance"], row["variance_bound"]]),
        Check("d_1(n)/log n moves monotonically toward 1", all(b < a for a, b in zip(gaps, gaps[1:])), ratios),
        Check("recursion E[d_1(n)]/log n decreases toward 1",
              all(b < a for a, b in zip(oracle_ratios, oracle_ratios[1:])) and oracle_ratios[-1] > 1,
              oracle_ratios),
    ]


CLT_VERTEX = 2


def criterion_7(seed: int, workers: int) -> list[Check]:
    checks = []
    cps = (100, 1000, 10_000, 100_000)
    for m in (1, 2):
        cfg = ExperimentConfig(statistic="clt", variant="linear", m=m, n_target=100_000, checkpoints=cps,
                               tracked_vertices=(1, CLT_VERTEX), replicates=2000,
                               master_seed=seed, workers=workers)
        rep = run_replicates(cfg)
        ks = rep.summary["ks_trend"][str(CLT_VERTEX)]["ks"]
        last = _row(rep, 100_000, vertex=CLT_VERTEX)
        lo, hi = th.CLT_VARIANCE_RANGE
        checks += [
            Check(f"m={m}: KS distance decreasing over n=1e2..1e5", all(b < a for a, b in zip(ks, ks[1:])), ks),
            Check(f"m={m}: KS distance at 1e5 < {th.KS_MAX}", ks[-1] < th.KS_MAX, ks[-1]),
            Check(f"m={m}: standardized variance in [{lo}, {hi}]", lo <= last["variance"] <= hi, last["variance"]),
        ]
    return checks


def criterion_8(seed: int, workers: int) -> list[Check]:
    n = 50_000
    lam = lambda_star_diagnostics()["lambda_star"]
    dd = run_replicates(ExperimentConfig(statistic="degree_dist", variant="inverse", m=1, n_target=n,
                                         replicates=100, master_seed=seed, workers=workers))
    row = _row(dd, n)
    tr = run_replicates(ExperimentConfig(statistic="trajectory", variant="inverse", m=1, n_target=n,
                                         tracked_vertices=(1,), replicates=500, master_seed=seed,
                                         workers=workers))
    ratio = _row(tr, n, vertex=1)["ratio_mean"]
    target = math.sqrt(2 / lam)
    nm = run_replicates(ExperimentConfig(statistic="normalizer", variant="inverse", m=1, n_target=n,
                                         replicates=100, master_seed=seed, workers=workers))
    c_ratio = _row(nm, n)["c_over_log_n"]
    return [
        Check(f"TV(P_k, p~) < {th.INVERSE_TV_MAX}", row["tv_to_limit"] < th.INVERSE_TV_MAX, row["tv_to_limit"]),
        Check(f"|D_n/n - lambda*| < {th.D_OVER_N_ABS_TOL}", abs(row["D_over_n_mean"] - lam) < th.D_OVER_N_ABS_TOL,
              row["D_over_n_mean"]),
        Check("mean d_1(n)/sqrt(log n) within 10% of sqrt(2/lambda*)",
              abs(ratio / target - 1) < th.FIXED_VERTEX_REL_TOL, [ratio, target]),
        Check("c_n/log n within 5% of 1/lambda*", abs(c_ratio * lam - 1) < th.C_N_REL_TOL, [c_ratio, 1 / lam]),
    ]


def criterion_9(seed: int, workers: int) -> list[Check]:
    rng = replicate_rng(seed, 0, 9)
    t = 1e5
    z = np.array([simulate_birth_process(1, t, rng).count(t) for _ in range(1000)]) / math.sqrt(t)
    checks = [Check("mean Z(t)/sqrt(t) at t=1e5 within 2% of sqrt(2)",
                    abs(z.mean() / math.sqrt(2) - 1) < th.BIRTH_SQRT2_REL_TOL, float(z.mean()))]
    for m in (1, 3):
        T = sample_jump_times(m, 100, 100_000, replicate_rng(seed, m, 9))
        n = np.arange(2, 101)
        target = (n - 1) * m + (n - 1) * (n - 2) / 2
        se = T[:, 1:].std(axis=0, ddof=1) / math.sqrt(T.shape[0])
        zs = np.abs(T[:, 1:].mean(axis=0) - target) / se
        checks.append(Check(f"m={m}: E[T_n] within {th.BIRTH_MEAN_SE_MULT:g} SE for n <= 100",
                            bool(np.all(zs < th.BIRTH_MEAN_SE_MULT)), float(zs.max())))
    return checks


def criterion_10(seed: int, workers: int) -> list[Check]:
    checks = []
    for variant, n, reps, tol in (("linear", 10_000, 200, th.SIZE_BIASED_LINEAR_TOL),
                                  ("inverse", 50_000, 100, th.SIZE_BIASED_INVERSE_TOL)):
        rep = run_replicates(ExperimentConfig(statistic="size_biased", variant=variant, m=1, n_target=n,
                                              replicates=reps, master_seed=seed, workers=workers))
        rows = {r[1]: r for r in rep.tables["size_biased"].rows}
        cols = rep.tables["size_biased"].columns
        dev = [rows[k][cols.index("abs_dev")] for k in (1, 2, 3)]
        checks.append(Check(f"{variant}: k=1..3 within {tol} of limit", max(dev) < tol, dev))
        total = _row(rep, n)["max_total"]
        checks.append(Check(f"{variant}: sum over k <= 1", total <= 1 + 1e-12, total))
    return checks


def criterion_11(seed: int, workers: int) -> list[Check]:
    checks = []
    for m in (2, 3):
        rep = run_replicates(ExperimentConfig(statistic="trajectory", variant="inverse", m=m, n_target=10_000,
                                              checkpoints=(1000, 10_000), tracked_vertices=(1,),
                                              replicates=1000, master_seed=seed, workers=workers))
        a, b = _row(rep, 1000, vertex=1), _row(rep, 10_000, vertex=1)
        band_a = (a["ratio_q01"], a["ratio_q99"])
        band_b = (b["ratio_q01"], b["ratio_q99"])
        bounded = all(0 < x < math.inf for x in band_a + band_b)
        drift = max(abs(y - x) / x for x, y in zip(band_a, band_b))
        checks.append(Check(f"m={m}: 1%-99% band bounded away from 0 and infinity", bounded, list(band_b)))
        checks.append(Check(f"m={m}: band endpoints move < 20% from n=1e3 to 1e4",
                            drift < th.QUANTILE_BAND_MAX_DRIFT, drift))
    return checks


DETERMINISM_CONFIGS = (
    dict(statistic="degree_dist", variant="linear", n_target=2000, checkpoints=(100, 2000), replicates=12),
    dict(statistic="trajectory", variant="inverse", m=2, n_target=2000, tracked_vertices=(1, 5), replicates=12),
    dict(statistic="clt", variant="linear", n_target=1000, checkpoints=(100, 1000), replicates=12),
    dict(statistic="size_biased", variant="inverse", n_target=1000, replicates=12),
    dict(statistic="embedding_equiv", variant="inverse", n_target=4, replicates=120_000),
    dict(statistic="normalizer", variant="inverse", m=2, n_target=500, replicates=6),
)


def _emit_all(root: Path, seed: int, workers: int) -> Path:
    root.mkdir()
    for i, kw in enumerate(DETERMINISM_CONFIGS):
        cfg = ExperimentConfig(master_seed=seed, workers=workers, **kw)
        emit_report(run_replicates(cfg), root, stem=f"{i}_{cfg.statistic.value}")
    return root


def criterion_12(seed: int, workers: int) -> list[Check]:
    with tempfile.TemporaryDirectory() as tmp:
        runs = [_emit_all(Path(tmp) / name, seed, w) for name, w in (("a", 1), ("b", 1), ("c", 2))]
        names = sorted(p.name for p in runs[0].iterdir() if not p.name.endswith(".timing.json"))
        same_run = filecmp.cmpfiles(runs[0], runs[1], names, shallow=False)
        same_workers = filecmp.cmpfiles(runs[0], runs[2], names, shallow=False)
    return [
        Check("re-run produces byte-identical files", not same_run[1] and not same_run[2], len(same_run[0])),
        Check("1 and 2 workers produce byte-identical files", not same_workers[1] and not same_workers[2],
              len(same_workers[0])),
    ]


CRITERIA: dict[int, tuple[str, Callable[[int, int], list[Check]]]] = {
    1: ("exact-oracle equivalence", criterion_1),
    2: ("sampler correctness against the exact law", criterion_2),
    3: ("normalizer bounds", criterion_3),
    4: ("lambda* solver and limit pmf", criterion_4),
    5: ("linear degree distribution", criterion_5),
    6: ("linear fixed-vertex trajectory", criterion_6),
    7: ("linear central limit diagnostic", criterion_7),
    8: ("inverse model limits", criterion_8),
    9: ("pure birth scaling", criterion_9),
    10: ("size-biased limits", criterion_10),
    11: ("inverse m > 1 tightness", criterion_11),
    12: ("determinism", criterion_12),
}

SUITES: dict[str, tuple[int, ...]] = {
    "all": tuple(CRITERIA),
    "quick": (1, 4, 9, 12),
    **{str(k): (k,) for k in CRITERIA},
}


def run_criterion(number: int, seed: int = SUITE_SEED, workers: int = 1) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    checks = fn(seed, workers)
    elapsed = time.perf_counter() - t0
    _runtime(checks, number, elapsed)
    return CriterionResult(number, title, checks, elapsed)


def run_suite(name: str, seed: int = SUITE_SEED, workers: int = 1,
              on_result: Callable[[CriterionResult], None] | None = None) -> list[CriterionResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    results = []
    for number in SUITES[name]:
        res = run_criterion(number, seed, workers)
        if on_result is not None:
            on_result(res)
        results.append(res)
    return results
