"""Experiment configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from ..graph import ModelVariant

__all__ = ["Statistic", "ExperimentConfig", "ConfigError", "load_config_file", "normalize_keys"]


class ConfigError(ValueError):
    pass


class Statistic(str, Enum):
    TRAJECTORY = "trajectory"
    DEGREE_DIST = "degree_dist"
    SIZE_BIASED = "size_biased"
    CLT = "clt"
    EMBEDDING_EQUIV = "embedding_equiv"
    NORMALIZER = "normalizer"


# fields that change results; everything else is presentation
_HASHED = ("variant", "m", "n_target", "checkpoints", "tracked_vertices",
           "replicates", "master_seed", "statistic")


@dataclass(frozen=True)
class ExperimentConfig:
    variant: ModelVariant = ModelVariant.LINEAR
    m: int = 1
    n_target: int = 1000
    checkpoints: tuple[int, ...] = ()
    tracked_vertices: tuple[int, ...] = (1,)
    replicates: int = 1
    master_seed: int = 0
    statistic: Statistic = Statistic.TRAJECTORY
    output_path: str | None = None
    workers: int = 1
    format: tuple[str, ...] = ("json", "csv")

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", ModelVariant(str(getattr(self.variant, "value", self.variant)).lower()))
            object.__setattr__(self, "statistic", Statistic(str(getattr(self.statistic, "value", self.statistic)).replace("-", "_")))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cps = tuple(sorted(set(int(c) for c in self.checkpoints))) or (int(self.n_target),)
        object.__setattr__(self, "checkpoints", cps)
        object.__setattr__(self, "tracked_vertices", tuple(int(v) for v in self.tracked_vertices))
        fmt = (self.format,) if isinstance(self.format, str) else tuple(self.format)
        object.__setattr__(self, "format", fmt)
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.n_target < 2:
            raise ConfigError(f"n_target must be >= 2, got {self.n_target}")
        if cps[0] < 2 or cps[-1] > self.n_target:
            raise ConfigError(f"checkpoints must lie in [2, {self.n_target}], got {list(cps)}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if any(v < 1 for v in self.tracked_vertices):
            raise ConfigError("tracked vertices are 1-based")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        bad = set(fmt) - {"json", "csv"}
        if bad:
            raise ConfigError(f"unknown output format(s): {sorted(bad)}")

    def canonical(self) -> dict[str, Any]:
        d = {}
        for name in _HASHED:
            v = getattr(self, name)
            d[name] = v.value if isinstance(v, Enum) else (list(v) if isinstance(v, tuple) else v)
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["variant"] = self.variant.value
        d["statistic"] = self.statistic.value
        d["checkpoints"] = list(self.checkpoints)
        d["tracked_vertices"] = list(self.tracked_vertices)
        d["format"] = list(self.format)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        kw = normalize_keys(data)
        for key in ("checkpoints", "tracked_vertices", "format"):
            if key in kw and isinstance(kw[key], list):
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


_ALIASES = {"model": "variant", "n": "n_target", "seed": "master_seed",
            "track": "tracked_vertices", "out": "output_path"}


def normalize_keys(data: dict[str, Any]) -> dict[str, Any]:
    """Map flag-style keys (``model``, ``n``, ``seed``, ...) to field names."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, value in data.items():
        key = key.replace("-", "_")
        key = _ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a JSON or YAML key-value file using the same keys as the CLI flags."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    if path.suffix in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value mapping")
    return data
