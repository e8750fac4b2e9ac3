"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_control_points(points) -> np.ndarray:
    """Four finite control points as a ``(4, dim)`` float array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    pts = check_array(pts, ensure_2d=True, dtype=float, ensure_all_finite=True, ensure_min_samples=1)
    if pts.shape[0] != 4:
        raise ValueError(f"expected 4 control points, got {pts.shape[0]}")
    return pts


def check_limit_vector(values, name: str) -> np.ndarray:
    vec = check_array(np.atleast_1d(np.asarray(values, dtype=float))[None, :], dtype=float).ravel()
    if np.any(vec <= 0):
        raise ValueError(f"all entries of {name} must be strictly positive")
    return vec


def check_velocity(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number")
    if value < 0:
        raise ValueError(f"{name} must be non-negative")
    return float(value)


def check_grid(n) -> int:
    if not isinstance(n, numbers.Integral) or isinstance(n, bool):
        raise ValueError("grid size must be an integer")
    if n < 16:
        raise ValueError("grid size must be at least 16")
    return int(n)


def check_path_coordinates(s, length: float) -> np.ndarray:
    s = check_array(np.atleast_1d(np.asarray(s, dtype=float))[:, None], dtype=float).ravel()
    if np.any(s < 0) or np.any(s > length * (1 + 1e-12)):
        raise ValueError(f"path coordinates must lie in [0, {length:.9g}]")
    return s
