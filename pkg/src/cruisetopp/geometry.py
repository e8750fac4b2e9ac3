"""Geometric paths and their arc-length parameterization.

A path is a cubic Bezier curve in position space. Planning happens in the
arc-length coordinate ``s`` of the position curve, so the curve parameter
``lam`` has to be inverted numerically. An optional heading row
``theta(s) = pi * s / s_e`` can be appended to the configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import comb

_BINOM = np.array([comb(3, i, exact=True) for i in range(4)], dtype=float)


class DomainError(ValueError):
    """Query outside the parameter domain of a path."""


class ZeroLengthPathError(ValueError):
    """Path whose control points all coincide."""


@dataclass(frozen=True)
class BezierPath:
    """Cubic Bezier curve ``P(lam) = sum_i C(3,i) (1-lam)^(3-i) lam^i P_i``.

    Parameters
    ----------
    control_points : array-like of shape (4, dim)
        Control points ``P0..P3`` in position units.
    orientation : bool
        Append the linear heading row ``pi * s / s_e`` to configurations.
    """

    control_points: np.ndarray
    orientation: bool = False

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] != 4:
            raise ValueError(
                f"a cubic Bezier path needs exactly 4 control points, got shape {pts.shape}"
            )
        if not np.all(np.isfinite(pts)):
            raise ValueError("control points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "control_points", pts)

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    @property
    def config_dim(self) -> int:
        return self.dim + (1 if self.orientation else 0)

    def _check_lam(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0.0) or np.any(lam > 1.0) or not np.all(np.isfinite(lam)):
            raise DomainError("Bezier parameter must lie in [0, 1]")
        return lam

    def evaluate(self, lam):
        """Position ``P(lam)``; vectorized over ``lam``."""
        lam = self._check_lam(lam)
        i = np.arange(4)
        basis = _BINOM * (1.0 - lam[..., None]) ** (3 - i) * lam[..., None] ** i
        return basis @ self.control_points

    def derivative(self, lam, order: int = 1):
        """``d^k P / d lam^k`` for ``order`` in {1, 2}."""
        lam = self._check_lam(lam)[..., None]
        p = self.control_points
        if order == 1:
            d = 3.0 * np.diff(p, axis=0)
            return (1 - lam) ** 2 * d[0] + 2 * (1 - lam) * lam * d[1] + lam**2 * d[2]
        if order == 2:
            d = 6.0 * np.diff(p, n=2, axis=0)
            return (1 - lam) * d[0] + lam * d[1]
        raise ValueError("order must be 1 or 2")


def bezier_eval(path: BezierPath, lam):
    """Evaluate ``path`` at curve parameter ``lam`` in [0, 1]."""
    return path.evaluate(lam)


@dataclass(frozen=True)
class ArcLengthMap:
    """Monotone table between the curve parameter and arc length.

    ``lam_of_s`` and ``s_of_lam`` are monotone cubic interpolants of the
    table, so the round trip is exact at the table nodes.
    """

    lam: np.ndarray
    s: np.ndarray
    tol_s: float
    _lam_of_s: PchipInterpolator = field(repr=False)
    _s_of_lam: PchipInterpolator = field(repr=False)

    @property
    def total_length(self) -> float:
        return float(self.s[-1])

    def lam_at(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -self.tol_s) or np.any(s > self.total_length + self.tol_s):
            raise DomainError(f"path coordinate outside [0, {self.total_length}]")
        return np.clip(self._lam_of_s(np.clip(s, 0.0, self.total_length)), 0.0, 1.0)

    def s_at(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < 0.0) or np.any(lam > 1.0):
            raise DomainError("Bezier parameter must lie in [0, 1]")
        return self._s_of_lam(lam)


def build_arclength_map(path: BezierPath, n_samples: int = 8000) -> ArcLengthMap:
    """Tabulate cumulative arc length with per-interval Simpson quadrature.

    ``n_samples`` is the number of lam intervals; the planner uses eight
    times its own grid density.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    pts = path.control_points
    if np.allclose(pts, pts[0], rtol=0.0, atol=1e-12):
        raise ZeroLengthPathError("path has zero length: all control points coincide")

    lam = np.linspace(0.0, 1.0, n_samples + 1)
    mid = 0.5 * (lam[:-1] + lam[1:])
    speed = np.linalg.norm(path.derivative(lam), axis=1)
    speed_mid = np.linalg.norm(path.derivative(mid), axis=1)
    h = np.diff(lam)
    pieces = h / 6.0 * (speed[:-1] + 4.0 * speed_mid + speed[1:])
    s = np.concatenate([[0.0], np.cumsum(pieces)])
    if s[-1] <= 1e-12:
        raise ZeroLengthPathError("path has zero length")
    if np.any(np.diff(s) <= 0.0):
        # stationary stretches (coincident interior control points) break monotonicity
        keep = np.concatenate([[True], np.diff(s) > 0.0])
        lam, s = lam[keep], s[keep]
    tol_s = 1e-9 * s[-1]
    return ArcLengthMap(
        lam=lam,
        s=s,
        tol_s=tol_s,
        _lam_of_s=PchipInterpolator(s, lam),
        _s_of_lam=PchipInterpolator(lam, s),
    )


def config_derivatives(path: BezierPath, amap: ArcLengthMap, s):
    """Configuration ``q(s)`` and its first two arc-length derivatives.

    The chain rule goes through the exact curve derivatives:
    ``lam_s = 1/|P'|`` and ``lam_ss = -(P'.P'') / |P'|^4``, so the position
    rows of ``q_s`` are unit vectors. Returns arrays of shape
    ``(len(s), n)`` (or ``(n,)`` for scalar ``s``).
    """
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    s_e = amap.total_length
    if np.any(s < -amap.tol_s) or np.any(s > s_e + amap.tol_s):
        raise DomainError(f"path coordinate outside [0, {s_e}]")
    s = np.clip(s, 0.0, s_e)
    lam = amap.lam_at(s)

    p = path.evaluate(lam)
    d1 = path.derivative(lam, 1)
    d2 = path.derivative(lam, 2)
    speed2 = np.maximum(np.einsum("ij,ij->i", d1, d1), 1e-300)
    lam_s = 1.0 / np.sqrt(speed2)
    lam_ss = -np.einsum("ij,ij->i", d1, d2) / speed2**2

    q = p
    q_s = d1 * lam_s[:, None]
    q_ss = d2 * (lam_s**2)[:, None] + d1 * lam_ss[:, None]
    if path.orientation:
        rate = np.pi / s_e
        q = np.column_stack([q, rate * s])
        q_s = np.column_stack([q_s, np.full_like(s, rate)])
        q_ss = np.column_stack([q_ss, np.zeros_like(s)])
    if scalar:
        return q[0], q_s[0], q_ss[0]
    return q, q_s, q_ss
