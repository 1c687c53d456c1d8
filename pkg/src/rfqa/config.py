"""Run configuration: flat ``key = value`` files overridden by command-line flags."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields

from .constants import D0, DISTANCE_CAP, GATE_THRESHOLD


class ConfigError(ValueError):
    pass


def _default_thresholds():
    return [round(0.05 * k, 2) for k in range(1, 21)]


@dataclass
class RunConfig:
    pools: str | None = None
    natives: str | None = None
    annotations: str | None = None
    model: str | None = None
    features: str | None = None
    truths: str | None = None
    predictions: list = field(default_factory=list)
    overrides: str | None = None
    out: str = "."
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 5
    max_depth: int | None = None
    gate: float = GATE_THRESHOLD
    cap: float = DISTANCE_CAP
    d0: float = D0
    per_class: int = 10000
    cv_folds: int = 10
    cv_repeats: int = 10
    seed: int = 0
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    thresholds: list = field(default_factory=_default_thresholds)

    def validate(self):
        if not 0.0 <= self.gate <= 1.0:
            raise ConfigError(f"gate {self.gate} must lie in [0, 1]")
        if self.cap <= 0 or self.d0 <= 0:
            raise ConfigError("cap and d0 must be positive")
        for name in ("n_trees", "min_leaf", "per_class", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be positive")
        if self.cv_folds < 2 or self.cv_repeats < 0:
            raise ConfigError("cv_folds must be >= 2 and cv_repeats >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        return self


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name, raw):
    f = _FIELDS[name]
    kind = str(f.type)
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
        if raw.lower() in ("", "none") and "None" in kind:
            return None
    try:
        if kind.startswith("list"):
            if isinstance(raw, str):
                raw = [p for p in raw.replace(",", " ").split() if p]
            return [float(v) for v in raw] if name == "thresholds" else [str(v) for v in raw]
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value)
    return values


def build_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then the config file at ``path``, then non-None ``overrides``."""
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is not None and key in _FIELDS:
            values[key] = _coerce(key, value)
    return dataclasses.replace(RunConfig(), **values).validate()
