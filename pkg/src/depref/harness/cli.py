"""Command-line entry point: ``depref <command> [flags]``.

Exit codes: 0 success, 1 usage or input error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from ..limits import solve_lambda_star
from ..oracles import expected_degree_linear, expected_Nk_linear
from .config import ConfigError, ExperimentConfig, load_config_file, normalize_keys
from .report import ReportIOError, emit_report, load_report
from .runner import estimate_fixed_vertex_trajectory, run_replicates
from .verify import SUITE_SEED, SUITES, run_suite

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2

RUN_COMMANDS = {
    "grow": "trajectory",
    "degree-dist": "degree_dist",
    "trajectory": "trajectory",
    "clt": "clt",
    "size-biased": "size_biased",
    "embed": "normalizer",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int(text: str) -> int:
    """Integer that may be written as 1e4 or 10_000."""
    try:
        return int(text.replace("_", ""))
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
        return int(value)


def _int_list(text: str) -> list[int]:
    try:
        return [_int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text}") from None


def _common(p: argparse.ArgumentParser, *, replicates: bool = True) -> None:
    # defaults are None so config-file values survive unless a flag is given
    p.add_argument("--config", type=Path, help="JSON or YAML file with the same keys as the flags")
    p.add_argument("--model", choices=["linear", "inverse"])
    p.add_argument("--m", type=_int)
    p.add_argument("--n", type=_int)
    if replicates:
        p.add_argument("--replicates", type=_int)
    p.add_argument("--seed", type=_int)
    p.add_argument("--checkpoints", type=_int_list, help="comma-separated vertex counts")
    p.add_argument("--track", type=_int_list, help="comma-separated vertex ids (1-based)")
    p.add_argument("--out", type=Path, help="existing directory for report files")
    p.add_argument("--format", choices=["csv", "json"], action="append",
                   help="output format; repeat for both (default both)")
    p.add_argument("--workers", type=_int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depref", description="De-preferential attachment experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "grow": "grow graphs; tracked degrees and histograms per checkpoint",
        "degree-dist": "empirical degree distribution against limits and oracles",
        "trajectory": "fixed-vertex degree trajectories",
        "clt": "normality of the standardized fixed-vertex degree (linear model)",
        "size-biased": "joint probability of attaching to a degree-k vertex (m = 1)",
        "embed": "continuous-time embedding of the inverse model",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "embed":
            p.add_argument("--equivalence", action="store_true",
                           help="chi-square test of embedding and samplers against the exact law")

    p = sub.add_parser("lambda-star", help="solve rho_hat(lambda) = 1")
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--series-tol", type=float, default=1e-15)

    p = sub.add_parser("oracle", help="exact expectations for the linear model")
    _common(p, replicates=False)
    p.add_argument("--table", choices=["degree", "nk"], default="degree")

    p = sub.add_parser("verify", help="run an acceptance suite")
    p.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    p.add_argument("--seed", type=_int, default=SUITE_SEED)
    p.add_argument("--workers", type=_int, default=1)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("report", help="re-emit or summarize a saved JSON report")
    p.add_argument("path", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=["csv", "json"], action="append")
    return parser


_FLAG_KEYS = {"model": "variant", "m": "m", "n": "n_target", "replicates": "replicates",
              "seed": "master_seed", "checkpoints": "checkpoints", "track": "tracked_vertices",
              "out": "output_path", "format": "format", "workers": "workers"}


def _config(args: argparse.Namespace, statistic: str) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if getattr(args, "config", None):
        data.update(normalize_keys(load_config_file(args.config)))
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = str(value) if isinstance(value, Path) else value
    data["statistic"] = statistic
    if statistic in ("normalizer", "embedding_equiv"):
        if data.get("variant", "inverse") != "inverse":
            raise UsageError("the embedding reproduces the inverse model; drop --model linear")
        data["variant"] = "inverse"
    return ExperimentConfig.from_dict(data)


def _emit(report, config_out: str | None, formats) -> None:
    if config_out is None:
        sys.stdout.write(report.to_json())
        return
    for path in emit_report(report, config_out, formats):
        print(path)


def _cmd_run(args) -> int:
    statistic = RUN_COMMANDS[args.command]
    if args.command == "embed" and args.equivalence:
        statistic = "embedding_equiv"
    cfg = _config(args, statistic)
    if args.command == "grow":
        report = estimate_fixed_vertex_trajectory(cfg, histograms=True)
        report.statistic = "grow"
    else:
        report = run_replicates(cfg)
    _emit(report, cfg.output_path, cfg.format)
    return EXIT_OK


def _cmd_lambda_star(args) -> int:
    sol = solve_lambda_star(args.tol, args.series_tol)
    out = {k: sol.as_dict()[k] for k in ("lambda_star", "rho_hat_at_root", "series_terms_used")}
    print(json.dumps(out))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.model not in (None, "linear"):
        raise UsageError("exact expectations are available for the linear model only")
    file = normalize_keys(load_config_file(args.config)) if args.config else {}
    n = args.n or file.get("n_target", 1000)
    m = args.m or file.get("m", 1)
    checkpoints = args.checkpoints or file.get("checkpoints")
    track = args.track or file.get("tracked_vertices") or [1]
    if args.table == "degree":
        columns = ["n", "vertex", "expected_degree", "variance_bound"]
        rows = []
        for v in track:
            tab = expected_degree_linear(v, n, m, exact_until=0)
            ns = [c for c in checkpoints if c >= tab.entry] if checkpoints else None
            rows += tab.rows(ns)
        rows.sort(key=lambda r: (r[0], r[1]))
    else:
        if m != 1:
            raise UsageError("the E[N_k(n)] recursion is for m = 1")
        snaps = checkpoints or [n]
        tab = expected_Nk_linear(max(snaps), exact_until=2, snapshots=snaps)
        columns = ["n", "k", "expected_Nk", "epsilon_k"]
        rows = []
        for s in sorted(set(snaps)):
            e = tab.snapshots[s]
            rows += [(s, k, float(e[k]), float(e[k] - s * 2.0 ** -k)) for k in range(1, e.size)]
    if args.out is None:
        fh = sys.stdout
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
        return EXIT_OK
    if not args.out.is_dir():
        raise ReportIOError(f"output directory does not exist: {args.out}")
    path = args.out / f"oracle_{args.table}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    print(path)
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    if args.out is not None and not args.out.is_dir():
        raise ReportIOError(f"output directory does not exist: {args.out}")

    def show(res):
        print("\n".join(res.lines()), flush=True)

    results = run_suite(args.suite, args.seed, args.workers, on_result=show)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if args.out is not None:
        body = {"suite": args.suite, "seed": args.seed, "results": [r.to_dict() for r in results]}
        (args.out / f"verify_{args.suite}.json").write_text(
            json.dumps(body, sort_keys=True, indent=1, default=str) + "\n")
        (args.out / f"verify_{args.suite}.timing.json").write_text(
            json.dumps({str(r.number): r.elapsed for r in results}) + "\n")
    return EXIT_VERIFY if failed else EXIT_OK


def _cmd_report(args) -> int:
    report = load_report(args.path)
    if args.out is None:
        print(f"statistic: {report.statistic}  config_hash: {report.config_hash}")
        print(json.dumps(report.summary, indent=1, sort_keys=True))
        return EXIT_OK
    for path in emit_report(report, args.out, tuple(args.format or ("json", "csv"))):
        print(path)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"lambda-star": _cmd_lambda_star, "oracle": _cmd_oracle,
                "verify": _cmd_verify, "report": _cmd_report}
    try:
        return handlers.get(args.command, _cmd_run)(args)
    except (ConfigError, UsageError, ReportIOError, ValueError) as exc:
        print(f"depref: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
