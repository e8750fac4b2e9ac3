"""Velocity limit curves on the phase plane.

Unbounded curve values are stored as ``numpy.inf``. They are compared
against finite velocities but never used in arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .model import ConstraintTable

GLOBAL_VELOCITY_CAP = 1e3


class EpsilonRangeError(ValueError):
    """Cruise velocity outside the admissible interval."""

    def __init__(self, epsilon, lo, hi):
        self.epsilon, self.lo, self.hi = epsilon, lo, hi
        super().__init__(f"epsilon={epsilon:.9g} outside the valid interval [{lo:.9g}, {hi:.9g}]")


def _curvature_tol(table: ConstraintTable) -> float:
    # curvature terms this small are rounding noise on straight stretches
    return 1e-12 * max(float(np.max(np.abs(table.A))), 1e-300) / max(table.length, 1e-300)


def _row_masks(table: ConstraintTable):
    return table.A > table.tol_zi, table.A < -table.tol_zi


def compute_mvc_v(table: ConstraintTable) -> np.ndarray:
    """Largest path velocity allowed by the actuator velocity bounds."""
    hi, _ = _row_masks(table)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(hi, -table.D / np.where(hi, table.A, 1.0), np.inf)
    return np.maximum(ratio.min(axis=1), 0.0)


def node_accel_bounds(table: ConstraintTable, sd):
    """Vectorized ``(alpha, beta)`` at every grid node for path velocities ``sd``."""
    hi, lo = _row_masks(table)
    sd = np.asarray(sd, dtype=float)
    num = -table.B * (sd * sd)[:, None] - table.C
    safe_a = np.where(hi | lo, table.A, 1.0)
    ratio = num / safe_a
    alpha = np.where(lo, ratio, -np.inf).max(axis=1)
    beta = np.where(hi, ratio, np.inf).min(axis=1)
    return alpha, beta


def _zero_inertia_cap(table: ConstraintTable) -> np.ndarray:
    zi = np.abs(table.A) <= table.tol_zi
    pos = zi & (table.B > _curvature_tol(table))
    with np.errstate(divide="ignore", invalid="ignore"):
        caps = np.where(pos, np.sqrt(np.maximum(-table.C, 0.0) / np.where(pos, table.B, 1.0)), np.inf)
    return caps.min(axis=1)


def compute_mvc_a(table: ConstraintTable, sd_cap: float | None = None, iters: int = 64) -> np.ndarray:
    """Smallest path velocity where ``alpha == beta``, by bisection on ``beta - alpha``.

    Nodes already infeasible at rest get 0; nodes feasible up to ``sd_cap``
    are unbounded. Zero-inertia rows cap the result at ``sqrt(-C/B)``.
    """
    if sd_cap is None:
        mvc_v = compute_mvc_v(table)
        finite = mvc_v[np.isfinite(mvc_v)]
        sd_cap = 10.0 * finite.max() if finite.size else GLOBAL_VELOCITY_CAP
    n = len(table.s)

    def gap(sd):
        a, b = node_accel_bounds(table, sd)
        return b - a

    g0 = gap(np.zeros(n))
    gcap = gap(np.full(n, sd_cap))
    out = np.full(n, np.inf)
    stuck = g0 < 0
    out[stuck] = 0.0
    active = ~stuck & (gcap <= 0)
    lo = np.zeros(n)
    hi = np.full(n, float(sd_cap))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = gap(mid) > 0
        lo = np.where(active & ok, mid, lo)
        hi = np.where(active & ~ok, mid, hi)
    out[active] = lo[active]
    return np.minimum(out, _zero_inertia_cap(table))


def compute_cvb(table: ConstraintTable) -> np.ndarray:
    """Constant velocity boundary: below it, ``sdd = 0`` satisfies every row."""
    rows = (np.abs(table.A) > table.tol_zi) & (table.B > _curvature_tol(table))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(rows, np.sqrt(-table.C / np.where(rows, table.B, 1.0)), np.inf)
    return vals.min(axis=1)


class BoundaryIndex:
    """Level-set index over the constant velocity boundary.

    The boundary samples are split into monotone runs once. A query for
    ``L(s) >= eps`` is then one binary search per run instead of a scan
    over the grid.
    """

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.values = values
        self.runs = []  # (start, stop_inclusive, ascending)
        n = len(values)
        start, direction = 0, 0
        for k in range(1, n):
            d = int(values[k] > values[k - 1]) - int(values[k] < values[k - 1])
            if direction == 0:
                direction = d
            elif d != 0 and d != direction:
                self.runs.append((start, k - 1, direction >= 0))
                start, direction = k - 1, d
        self.runs.append((start, n - 1, direction >= 0))
        self._sorted = []
        for a, b, asc in self.runs:
            seg = values[a:b + 1]
            self._sorted.append(seg if asc else seg[::-1])
        self._lo = np.array([seg[0] for seg in self._sorted])
        self._hi = np.array([seg[-1] for seg in self._sorted])
        self._start = np.array([a for a, _, _ in self.runs])
        self._stop = np.array([b for _, b, _ in self.runs])

    def at_or_above(self, eps: float) -> np.ndarray:
        """Boolean node mask of ``values >= eps``.

        Runs entirely above or below ``eps`` are settled from their end
        values; only runs straddling it need a binary search.
        """
        n = len(self.values)
        edges = np.zeros(n + 1, dtype=int)
        full = self._lo >= eps
        np.add.at(edges, self._start[full], 1)
        np.add.at(edges, self._stop[full] + 1, -1)
        for r in np.flatnonzero(~full & (self._hi >= eps)):
            a, b, asc = self.runs[r]
            j = int(np.searchsorted(self._sorted[r], eps, side="left"))
            if asc:
                edges[a + j] += 1
                edges[b + 1] -= 1
            else:
                edges[a] += 1
                edges[b + 1 - j] -= 1
        return np.cumsum(edges[:-1]) > 0


def _crossing(s0, s1, f0, f1):
    """Root of the linear interpolant between two samples of opposite sign."""
    if not (np.isfinite(f0) and np.isfinite(f1)) or f0 == f1:
        return None
    t = f0 / (f0 - f1)
    return s0 + min(max(t, 0.0), 1.0) * (s1 - s0)


def mask_intervals(s, mask, level):
    """Maximal runs of ``mask`` with ends moved to the interpolated crossings of ``level``.

    ``level`` is a node array that is ``>= 0`` exactly where ``mask`` holds.
    Returns ``(s_start, s_end, k_start, k_end, inside)`` tuples.
    """
    mask = np.asarray(mask, dtype=bool)
    n = len(mask)
    starts = np.concatenate([[0], np.flatnonzero(mask[1:] != mask[:-1]) + 1])
    ends = np.concatenate([starts[1:] - 1, [n - 1]])
    out = []
    for k, j in zip(starts.tolist(), ends.tolist()):
        a = s[k]
        if k > 0:
            x = _crossing(s[k - 1], s[k], level[k - 1], level[k])
            a = x if x is not None else (s[k] if mask[k] else s[k - 1])
        b = s[j]
        if j < n - 1:
            x = _crossing(s[j], s[j + 1], level[j], level[j + 1])
            b = x if x is not None else (s[j] if mask[j] else s[j + 1])
        out.append((float(a), float(b), k, j, bool(mask[k])))
    return out


@dataclass(frozen=True)
class Partition:
    """Split of the cruise line ``sd = eps`` into feasible and infeasible stretches.

    ``under`` marks nodes with ``eps <= L(s)``, where holding ``sd = eps``
    with zero path acceleration is admissible.
    """

    under: np.ndarray
    intervals: list

    def under_intervals(self):
        return [(a, b) for a, b, _, _, inside in self.intervals if inside]

    def under_length(self) -> float:
        return float(sum(b - a for a, b in self.under_intervals()))


@dataclass(frozen=True)
class VelocityLimits:
    """Cruise-independent curves, computed once per problem."""

    table: ConstraintTable
    mvc_v: np.ndarray
    mvc_a: np.ndarray
    mvc: np.ndarray
    cvb: np.ndarray
    index: BoundaryIndex = field(repr=False)

    @property
    def s(self):
        return self.table.s

    @cached_property
    def max_mvc(self) -> float:
        finite = self.mvc[np.isfinite(self.mvc)]
        return float(finite.max()) if finite.size else GLOBAL_VELOCITY_CAP

    def epsilon_range(self, sd_start: float = 0.0, sd_end: float = 0.0):
        return max(sd_start, sd_end), self.max_mvc

    def partition(self, eps: float) -> Partition:
        under = self.index.at_or_above(eps)
        with np.errstate(invalid="ignore"):
            level = self.cvb - eps
        return Partition(under, mask_intervals(self.s, under, level))


def precompute_limits(table: ConstraintTable, sd_cap: float | None = None) -> VelocityLimits:
    """Build every curve that does not depend on the cruise velocity.

    Also primes the integration tables of ``table.field``, including the
    velocity limit at cell midpoints.
    """
    mvc_v = compute_mvc_v(table)
    mvc_a = compute_mvc_a(table, sd_cap)
    cvb = compute_cvb(table)
    table.field.set_midpoint_caps(midpoint_mvc(table, sd_cap) ** 2)
    return VelocityLimits(table, mvc_v, mvc_a, np.minimum(mvc_a, mvc_v), cvb, BoundaryIndex(cvb))


def midpoint_mvc(table: ConstraintTable, sd_cap: float | None = None) -> np.ndarray:
    """Maximum velocity curve at the cell midpoints, rows interpolated linearly."""
    mid = [0.5 * (x[:-1] + x[1:]) for x in (table.A, table.B, table.C, table.D)]
    s_mid = 0.5 * (table.s[:-1] + table.s[1:])
    if len(s_mid) < 2:
        s_mid = np.array([s_mid[0], s_mid[0] + table.ds])
        mid = [np.vstack([x, x]) for x in mid]
    half = ConstraintTable.from_rows(s_mid, *mid, tol_zi=table.tol_zi)
    mvc = np.minimum(compute_mvc_a(half, sd_cap), compute_mvc_v(half))[:table.n_intervals]
    return np.minimum(mvc, _crossing_cap(table))


def _crossing_cap(table: ConstraintTable) -> np.ndarray:
    """Per cell, the zero-inertia limit ``sqrt(-C/B)`` where a row's ``A`` changes sign inside the cell.

    The limit curve dips to this value between the nodes, below both the node
    and the midpoint samples.
    """
    A0, A1 = table.A[:-1], table.A[1:]
    flips = A0 * A1 < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(flips, A0 / (A0 - A1), 0.0)
        B = table.B[:-1] + t * (table.B[1:] - table.B[:-1])
        C = table.C[:-1] + t * (table.C[1:] - table.C[:-1])
        ok = flips & (B > _curvature_tol(table))
        caps = np.where(ok, np.sqrt(np.maximum(-C, 0.0) / np.where(ok, B, 1.0)), np.inf)
    return caps.min(axis=1)


@dataclass(frozen=True)
class LimitCurves:
    """All limit curves for one cruise velocity ``epsilon``."""

    limits: VelocityLimits
    epsilon: float
    mvc_star: np.ndarray
    partition: Partition
    cruise: np.ndarray
    cruise_arcs: list

    @property
    def table(self):
        return self.limits.table

    @property
    def s(self):
        return self.limits.s

    @property
    def mvc_v(self):
        return self.limits.mvc_v

    @property
    def mvc_a(self):
        return self.limits.mvc_a

    @property
    def mvc(self):
        return self.limits.mvc

    @property
    def cvb(self):
        return self.limits.cvb

    @property
    def max_mvc(self):
        return self.limits.max_mvc


def reconstruct(limits: VelocityLimits, eps: float, sd_start: float = 0.0, sd_end: float = 0.0,
                check: bool = True) -> LimitCurves:
    """Cap the maximum velocity curve at ``eps`` and partition the cruise line.

    Cruise arcs are the stretches where ``sd = eps`` lies on the capped curve
    and is below the constant velocity boundary.
    """
    eps = float(eps)
    lo, hi = limits.epsilon_range(sd_start, sd_end)
    if check and not (lo <= eps <= hi):
        raise EpsilonRangeError(eps, lo, hi)
    mvc_star = np.minimum(limits.mvc, eps)
    part = limits.partition(eps)
    cruise = part.under & (limits.mvc >= eps)
    with np.errstate(invalid="ignore"):
        level = np.minimum(limits.cvb, limits.mvc) - eps
    arcs = [(a, b, ka, kb) for a, b, ka, kb, inside in mask_intervals(limits.s, cruise, level) if inside]
    return LimitCurves(limits, eps, mvc_star, part, cruise, arcs)
