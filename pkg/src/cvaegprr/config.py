"""Experiment configuration: a flat key=value text format.

Every key is validated up front and unknown keys are rejected, so a typo
fails before any computation starts.  ``render_config`` writes the
canonical form; ``parse_config(render_config(cfg))`` returns an equal
config.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "parse_config",
    "render_config",
    "load_config",
    "save_config",
    "config_hash",
]


class ConfigError(ValueError):
    """Invalid, unknown or inconsistent configuration keys."""


@dataclass(frozen=True)
class ExperimentConfig:
    data: str = "morlet"                 # morlet | files
    n_snapshots: int = 1000
    grid_intervals: int = 500
    n_train: int = 500
    noise: float = 0.01
    eps_pod: float | None = None
    n_pod: int | None = 10
    gpr_restarts: int = 5
    hidden: tuple[int, ...] = (100, 100, 100, 100)
    lr_stages: tuple[tuple[float, int], ...] = ((1e-3, 100), (1e-4, 50), (1e-5, 50))
    schedule_unit: str = "epoch"
    batch_size: int = 1000
    n_mc: int = 1
    n_samples: int = 500
    train_discrete: bool = False
    train_file: str | None = None
    test_file: str | None = None
    fine_grid_intervals: int = 1000
    out_dir: str = "out"
    seed: int = 0


def _parse_int(key, raw):
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc


def _parse_float(key, raw):
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc


def _parse_bool(key, raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}")


def _parse_int_tuple(key, raw):
    try:
        return tuple(int(t) for t in raw.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated integers, got {raw!r}") from exc


def _parse_lr_stages(key, raw):
    stages = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            lr_text, n_text = part.split(":")
            stages.append((float(lr_text), int(n_text)))
        except ValueError as exc:
            raise ConfigError(f"{key}: expected rate:count pairs, got {part!r}") from exc
    return tuple(stages)


_PARSERS = {
    "data": lambda k, v: v.strip(),
    "n_snapshots": _parse_int,
    "grid_intervals": _parse_int,
    "n_train": _parse_int,
    "noise": _parse_float,
    "eps_pod": _parse_float,
    "n_pod": _parse_int,
    "gpr_restarts": _parse_int,
    "hidden": _parse_int_tuple,
    "lr_stages": _parse_lr_stages,
    "schedule_unit": lambda k, v: v.strip(),
    "batch_size": _parse_int,
    "n_mc": _parse_int,
    "n_samples": _parse_int,
    "train_discrete": _parse_bool,
    "train_file": lambda k, v: v.strip(),
    "test_file": lambda k, v: v.strip(),
    "fine_grid_intervals": _parse_int,
    "out_dir": lambda k, v: v.strip(),
    "seed": _parse_int,
}

_FIELD_ORDER = [f.name for f in fields(ExperimentConfig)]


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.data not in ("morlet", "files"):
        raise ConfigError(f"data must be 'morlet' or 'files', got {cfg.data!r}")
    if cfg.data == "morlet":
        if cfg.n_snapshots < 2:
            raise ConfigError("n_snapshots must be at least 2")
        if cfg.grid_intervals < 2:
            raise ConfigError("grid_intervals must be at least 2")
        if not 0 < cfg.n_train < cfg.n_snapshots:
            raise ConfigError("n_train must lie strictly between 0 and n_snapshots")
        if cfg.fine_grid_intervals < 2:
            raise ConfigError("fine_grid_intervals must be at least 2")
    else:
        if not cfg.train_file:
            raise ConfigError("data=files requires train_file")
    if cfg.noise < 0:
        raise ConfigError("noise must be nonnegative")
    if (cfg.eps_pod is None) == (cfg.n_pod is None):
        raise ConfigError("exactly one of eps_pod and n_pod must be set")
    if cfg.eps_pod is not None and not 0 < cfg.eps_pod <= 1:
        raise ConfigError("eps_pod must lie in (0, 1]")
    if cfg.n_pod is not None and cfg.n_pod < 1:
        raise ConfigError("n_pod must be at least 1")
    if cfg.gpr_restarts < 1:
        raise ConfigError("gpr_restarts must be at least 1")
    if not cfg.hidden or any(w < 1 for w in cfg.hidden):
        raise ConfigError("hidden must list positive layer widths")
    if not cfg.lr_stages or any(lr <= 0 or n < 1 for lr, n in cfg.lr_stages):
        raise ConfigError("lr_stages must pair positive rates with positive counts")
    if cfg.schedule_unit not in ("epoch", "iteration"):
        raise ConfigError("schedule_unit must be 'epoch' or 'iteration'")
    if cfg.batch_size < 1 or cfg.n_mc < 1 or cfg.n_samples < 1:
        raise ConfigError("batch_size, n_mc and n_samples must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _PARSERS[key](key, raw)
    # eps_pod and n_pod are alternatives: naming one clears the other's default
    if "eps_pod" in values and "n_pod" not in values:
        values["n_pod"] = None
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def _render_value(name, value):
    if name == "hidden":
        return ",".join(str(w) for w in value)
    if name == "lr_stages":
        return ",".join(f"{lr!r}:{n}" for lr, n in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: ExperimentConfig) -> str:
    lines = []
    for name in _FIELD_ORDER:
        value = getattr(cfg, name)
        if value is None:
            continue
        lines.append(f"{name} = {_render_value(name, value)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(render_config(cfg))


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode("utf-8")).hexdigest()[:16]
