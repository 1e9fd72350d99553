"""Run configuration: a ``key = value`` text file plus command-line overrides."""

from __future__ import annotations

from pathlib import Path

from . import _io

DEFAULTS: dict = {
    "seed": 0,
    "workdir": "run",
    "n_boundary": 32,
    "n_rings": 0,  # 0 picks a ring count matched to n_boundary
    "n_train": 200,
    "n_test": 50,
    "sigma": 0.0,
    "image_size": 128,
    "mask": "principal",
    "rate": 0.01,
    "level": 3,
    "T": 200,
    "beta_min": 1e-4,
    "beta_max": 0.1,
    "width": 16,
    "levels": 2,
    "steps": 3000,
    "batch_size": 32,
    "lr": 1e-3,
    "ema_decay": 0.999,
    "weighting": "noise",
    "n_samples": 8,
    "lambda_rel": 1e-3,
    "lambda_tune": 40,  # training samples used to pick lambda; 0 keeps lambda_rel
    "prior": "noser",
    "methods": "full,diffusion,baseline,zero-fill",
    "theory_instances": 100,
    "theory_polygons": 500,
}

CHOICES = {
    "mask": ("principal", "random", "hierarchical"),
    "weighting": ("unit", "noise"),
    "prior": ("noser", "identity"),
}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _coerce(key, value):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            return str(value).lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    return str(value)


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the config file, then non-None overrides; validated."""
    cfg = dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        cfg.update(parse_config_text(p.read_text(encoding="utf-8")))
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = _coerce(k, v)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    for key, allowed in CHOICES.items():
        if cfg[key] not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {cfg[key]!r}")
    if cfg["n_boundary"] < 8:
        raise ConfigError("n_boundary must be at least 8")
    if cfg["n_boundary"] % (2 ** cfg["levels"]):
        raise ConfigError("n_boundary must be divisible by 2**levels")
    if cfg["mask"] == "hierarchical" and cfg["n_boundary"] % (2 ** cfg["level"]):
        raise ConfigError("n_boundary must be divisible by 2**level for hierarchical masks")
    if not 0 < cfg["rate"] <= 1:
        raise ConfigError("rate must lie in (0, 1]")
    if not 0 <= cfg["sigma"] < 1:
        raise ConfigError("sigma must lie in [0, 1)")
    if cfg["lambda_tune"] < 0:
        raise ConfigError("lambda_tune must be non-negative")
    for key in ("n_train", "n_test", "steps", "batch_size", "n_samples", "T"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")


def config_hash(cfg: dict, keys=None) -> str:
    """Digest of the configuration (restricted to ``keys`` when given)."""
    sel = {k: cfg[k] for k in sorted(keys or cfg) if k != "workdir"}
    return _io.digest(sel)


DATA_KEYS = ("seed", "n_boundary", "n_rings", "n_train", "n_test", "sigma", "image_size")
