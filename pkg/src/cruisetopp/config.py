"""Problem files: one ``key = value`` pair per line, values in JSON syntax.

Example::

    # straight 2 m move on a single axis
    control_points = [[0], [0.6667], [1.3333], [2]]
    model = "unit"
    v_max = [1.0]
    a_max = [1.0]
    epsilon = 1.0

Bare words are accepted for string values (``model = unit``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import MODELS

REQUIRED = ("control_points", "v_max", "a_max")
OPTIONAL = ("orientation", "model", "start_velocity", "end_velocity", "epsilon", "sweep", "grid", "window")


class ConfigError(ValueError):
    """Malformed problem file; carries the offending line and field when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class PlanConfig:
    control_points: np.ndarray
    v_max: np.ndarray
    a_max: np.ndarray
    model: str = "unit"
    orientation: bool = False
    start_velocity: float = 0.0
    end_velocity: float = 0.0
    epsilon: float | None = None
    sweep: tuple | None = None
    grid: int = 1000
    window: float | None = None


def _number(value, key, line, *, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        raise ConfigError("expected a finite number", line, key)
    if positive and value <= 0:
        raise ConfigError("must be strictly positive", line, key)
    if nonneg and value < 0:
        raise ConfigError("must be non-negative", line, key)
    return float(value)


def _vector(value, key, line):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of numbers", line, key)
    return np.array([_number(v, key, line, positive=True) for v in value])


def parse_config(text: str) -> PlanConfig:
    raw = {}
    lines = {}
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", no)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in REQUIRED + OPTIONAL:
            raise ConfigError("unknown field", no, key)
        if key in raw:
            raise ConfigError("duplicate field", no, key)
        try:
            raw[key] = json.loads(value)
        except json.JSONDecodeError:
            if not value or not value.replace("_", "").isalnum():
                raise ConfigError(f"cannot parse value {value!r}", no, key) from None
            raw[key] = value
        lines[key] = no
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError("missing required field", None, key)

    ln = lines.get
    pts = raw["control_points"]
    try:
        pts = np.array(pts, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a 4 x dim array of numbers", ln("control_points"), "control_points") from None
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] != 4 or not np.all(np.isfinite(pts)):
        raise ConfigError(f"expected a 4 x dim array of finite numbers, got shape {pts.shape}",
                          ln("control_points"), "control_points")

    cfg = PlanConfig(pts, _vector(raw["v_max"], "v_max", ln("v_max")), _vector(raw["a_max"], "a_max", ln("a_max")))
    if "model" in raw:
        if raw["model"] not in MODELS:
            raise ConfigError(f"unknown model, choose from {sorted(MODELS)}", ln("model"), "model")
        cfg.model = raw["model"]
    if "orientation" in raw:
        val = raw["orientation"]
        if val in ("linear", True):
            cfg.orientation = True
        elif val in ("none", False):
            cfg.orientation = False
        else:
            raise ConfigError("expected 'linear' or 'none'", ln("orientation"), "orientation")
    for key in ("start_velocity", "end_velocity"):
        if key in raw:
            setattr(cfg, key, _number(raw[key], key, ln(key), nonneg=True))
    if "epsilon" in raw:
        cfg.epsilon = _number(raw["epsilon"], "epsilon", ln("epsilon"), positive=True)
    if "window" in raw:
        cfg.window = _number(raw["window"], "window", ln("window"), nonneg=True)
    if "grid" in raw:
        g = raw["grid"]
        if isinstance(g, bool) or not isinstance(g, int) or g < 16:
            raise ConfigError("expected an integer >= 16", ln("grid"), "grid")
        cfg.grid = g
    if "sweep" in raw:
        sw = raw["sweep"]
        if not (isinstance(sw, list) and len(sw) == 3):
            raise ConfigError("expected [epsilon_min, epsilon_max, steps]", ln("sweep"), "sweep")
        lo = _number(sw[0], "sweep", ln("sweep"), positive=True)
        hi = _number(sw[1], "sweep", ln("sweep"), positive=True)
        steps = sw[2]
        if isinstance(steps, bool) or not isinstance(steps, int) or steps < 2:
            raise ConfigError("sweep needs at least 2 steps", ln("sweep"), "sweep")
        if hi < lo:
            raise ConfigError("sweep upper bound below lower bound", ln("sweep"), "sweep")
        cfg.sweep = (lo, hi, steps)
    return cfg


def load_config(path) -> PlanConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config(text)
