"""Report container and its JSON/CSV serialization.

``<stem>.json`` holds the full report with sorted keys; every table is also
written as ``<stem>_<table>.csv`` whose first line is ``# config_hash=<hash>``.
Wall time is not part of the reproducible content and goes to
``<stem>.timing.json``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

__all__ = ["Table", "Report", "ReportIOError", "clean", "emit_report", "load_report"]


class ReportIOError(OSError):
    pass


def clean(value: Any) -> Any:
    """Convert to plain JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [clean(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]

    def __post_init__(self):
        self.rows = [clean(list(r)) for r in self.rows]
        width = len(self.columns)
        if any(len(r) != width for r in self.rows):
            raise ValueError(f"row width differs from the {width} columns")

    def to_dict(self) -> dict[str, Any]:
        return {"columns": list(self.columns), "rows": self.rows}


@dataclass
class Report:
    statistic: str
    config: dict[str, Any]
    config_hash: str
    summary: dict[str, Any]
    tables: dict[str, Table]
    lambda_star: dict[str, Any]
    version: str
    rng_scheme: str
    wall_time: float | None = field(default=None, compare=False)

    def __post_init__(self):
        self.summary = clean(self.summary)
        self.lambda_star = clean(self.lambda_star)
        self.config = clean(self.config)

    def to_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "config": self.config,
            "config_hash": self.config_hash,
            "summary": self.summary,
            "tables": {k: t.to_dict() for k, t in self.tables.items()},
            "lambda_star": self.lambda_star,
            "version": self.version,
            "rng_scheme": self.rng_scheme,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Report":
        return cls(
            statistic=d["statistic"],
            config=d["config"],
            config_hash=d["config_hash"],
            summary=d["summary"],
            tables={k: Table(t["columns"], t["rows"]) for k, t in d["tables"].items()},
            lambda_star=d["lambda_star"],
            version=d["version"],
            rng_scheme=d["rng_scheme"],
        )


def _require_dir(out_dir: Path) -> None:
    if not out_dir.is_dir():
        raise ReportIOError(f"output directory does not exist: {out_dir}")


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc.strerror}") from None


def emit_report(report: Report, out_dir: str | Path, formats=("json", "csv"),
                stem: str | None = None) -> list[Path]:
    """Write the report files and return their paths."""
    out_dir = Path(out_dir)
    _require_dir(out_dir)
    stem = stem or report.statistic
    written = []
    if "json" in formats:
        path = out_dir / f"{stem}.json"
        _write(path, report.to_json())
        written.append(path)
    if "csv" in formats:
        for name, table in report.tables.items():
            path = out_dir / f"{stem}_{name}.csv"
            try:
                with path.open("w", newline="") as fh:
                    fh.write(f"# config_hash={report.config_hash}\n")
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(table.columns)
                    w.writerows(["" if v is None else v for v in row] for row in table.rows)
            except OSError as exc:
                raise ReportIOError(f"cannot write {path}: {exc.strerror}") from None
            written.append(path)
    if report.wall_time is not None:
        path = out_dir / f"{stem}.timing.json"
        _write(path, json.dumps({"config_hash": report.config_hash,
                                 "wall_time_seconds": report.wall_time}) + "\n")
    return written


def load_report(path: str | Path) -> Report:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror}") from None
    return Report.from_dict(data)


def read_csv_table(path: str | Path) -> tuple[str, Table]:
    """Parse a CSV written by :func:`emit_report`; returns (config_hash, table)."""
    with Path(path).open(newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise ValueError(f"{path}: missing config hash line")
        rows = list(csv.reader(fh))
    return first.split("=", 1)[1], Table(rows[0], rows[1:])
