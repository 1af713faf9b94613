"""Engine configuration: thresholds, ridge strength, refit weights, device
calibration, and windowing. Loaded from a TOML key/value file."""

from __future__ import annotations

import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .modeling import (
    DEFAULT_LAMBDA,
    DEFAULT_MIN_ROWS,
    DEFAULT_WEIGHT_GROUP,
    DEFAULT_WEIGHT_USER,
)
from .sensing import (
    DEFAULT_DISTANCE_CM,
    DEFAULT_FOCAL_PX,
    DEFAULT_MIN_SAMPLES,
    DEFAULT_THETA_RUN,
    DEFAULT_THETA_STILL,
    DEFAULT_WINDOW_MS,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# config-file key -> dataclass field
_KEY_ALIASES = {
    "theta1": "theta_still",
    "theta2": "theta_run",
    "lambda": "ridge_lambda",
    "w_g": "weight_group",
    "w_u": "weight_user",
}


@dataclass
class EngineConfig:
    theta_still: float = DEFAULT_THETA_STILL
    theta_run: float = DEFAULT_THETA_RUN
    ridge_lambda: float = DEFAULT_LAMBDA
    weight_group: float = DEFAULT_WEIGHT_GROUP
    weight_user: float = DEFAULT_WEIGHT_USER
    focal_px: float = DEFAULT_FOCAL_PX
    window_ms: int = DEFAULT_WINDOW_MS
    min_samples: int = DEFAULT_MIN_SAMPLES
    min_rows: int = DEFAULT_MIN_ROWS
    default_distance_cm: float = DEFAULT_DISTANCE_CM
    default_ipd_cm: float = 6.3
    ipd_min_cm: float = 4.5
    ipd_max_cm: float = 8.0
    recent_distance_window: int = 50

    def __post_init__(self):
        if self.theta_still >= self.theta_run:
            raise ValueError("theta1 must be below theta2")
        if self.ridge_lambda < 0:
            raise ValueError("lambda must be >= 0")
        if self.weight_user <= 0 or self.weight_group <= 0:
            raise ValueError("weights must be positive")
        if self.weight_user <= self.weight_group:
            raise ValueError("w_u must exceed w_g")


def load_config(path: str | Path) -> EngineConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(EngineConfig)}
    kwargs = {}
    for key, value in raw.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in known:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[name] = value
    return EngineConfig(**kwargs)
