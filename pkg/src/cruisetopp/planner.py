"""Complete numerical integration on the phase plane.

The profile is assembled from two sweeps over the grid:

* a backward sweep from ``(s_e, sd_e)`` that chains decelerating
  integrations with rides along the capped limit curve, giving the largest
  velocity at each node from which the goal is still reachable;
* a forward sweep from ``(0, sd_0)`` that chains accelerating integrations
  and follows the backward envelope wherever it cuts them.

Cruise arcs (stretches where ``sd = eps`` is admissible) are crossed in one
jump in both sweeps, which is why small ``eps`` values plan fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .limits import LimitCurves, node_accel_bounds

TAG_ACCEL = "accel-beta"
TAG_DECEL = "decel-alpha"
TAG_ARC = "switch-arc"
TAG_BLEND = "bio-blend"

REASONS = ("boundary-above-MVC*", "forward-stall", "no-connection", "degenerate-path")


class PlanningFailure(Exception):
    """The planning problem has no solution; ``reason`` is one of :data:`REASONS`."""

    def __init__(self, reason: str, detail: str = "", s: float | None = None):
        assert reason in REASONS, reason
        self.reason = reason
        self.detail = detail
        self.s = s
        msg = reason if not detail else f"{reason}: {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class SwitchPoint:
    s: float
    sd: float
    kind: str  # tangent | discontinuity | zero-inertia | arc-endpoint-left | arc-endpoint-right


@dataclass(frozen=True)
class SwitchArc:
    s_start: float
    s_end: float
    kind: str  # cruise | mvc


@dataclass(frozen=True)
class Intersection:
    """Junction of two profile pieces where the path acceleration jumps."""

    s: float
    sd: float
    cell: int
    left_tag: str
    right_tag: str
    left_accel: float
    right_accel: float

    @property
    def jump(self) -> float:
        return abs(self.right_accel - self.left_accel)


@dataclass(frozen=True)
class Segment:
    tag: str
    k_start: int
    k_end: int


@dataclass(frozen=True)
class Tolerances:
    velocity: float
    accel: float
    u: float
    stall: float

    @classmethod
    def for_curves(cls, curves: LimitCurves) -> "Tolerances":
        vmax = curves.max_mvc
        amax = float(np.max(curves.table.a_max)) if np.max(curves.table.a_max) > 0 else 1.0
        top = max(float(np.max(curves.mvc_star)), 1e-300)
        return cls(1e-6 * vmax, 1e-6 * amax, 1e-10 * top * top, (1e-6 * vmax) ** 2)


@dataclass
class PhaseProfile:
    """Velocity profile sampled at the grid nodes.

    ``tags`` holds the provenance of each node. ``intersections`` are the
    acceleration jumps left by the bang-bang assembly.
    """

    s: np.ndarray
    sd: np.ndarray
    sdd: np.ndarray
    tags: np.ndarray
    curves: LimitCurves = field(repr=False)
    intersections: list = field(default_factory=list)
    switch_points: list = field(default_factory=list)
    switch_arcs: list = field(default_factory=list)
    corners: list = field(default_factory=list)
    windows: list = field(default_factory=list)

    @property
    def sd_start(self) -> float:
        return float(self.sd[0])

    @property
    def sd_end(self) -> float:
        return float(self.sd[-1])

    @property
    def u(self) -> np.ndarray:
        return self.sd * self.sd

    @property
    def segments(self) -> list:
        out = []
        k = 0
        n = len(self.tags)
        while k < n:
            j = k
            while j + 1 < n and self.tags[j + 1] == self.tags[k]:
                j += 1
            out.append(Segment(str(self.tags[k]), k, j))
            k = j + 1
        return out

    def velocity_at(self, s):
        """Path velocity at arbitrary ``s``, interpolating ``sd^2`` linearly."""
        return np.sqrt(np.maximum(np.interp(s, self.s, self.u), 0.0))

    def copy(self) -> "PhaseProfile":
        return PhaseProfile(self.s.copy(), self.sd.copy(), self.sdd.copy(), self.tags.copy(), self.curves,
                            list(self.intersections), list(self.switch_points), list(self.switch_arcs),
                            list(self.corners), list(self.windows))


@dataclass(frozen=True)
class IntegrationResult:
    """Samples of one integrated piece, ordered in integration direction."""

    s: np.ndarray
    sd: np.ndarray
    nodes: np.ndarray
    termination: str  # mvc | intersect | stall | end
    crossing: tuple | None = None

    @property
    def last_node(self) -> int:
        return int(self.nodes[-1])


def _arc_index(curves: LimitCurves):
    n = len(curves.s)
    start = np.full(n, -1)
    end = np.full(n, -1)
    for _, _, ka, kb in curves.cruise_arcs:
        start[ka:kb + 1] = ka
        end[ka:kb + 1] = kb
    return start, end


def _start_node(curves: LimitCurves, start):
    s0, sd0 = start
    table = curves.table
    x = (s0 - table.s[0]) / table.ds
    k = int(round(x))
    if abs(x - k) > 1e-9:
        raise ValueError("integration must start on a grid node")
    return k, float(sd0) ** 2


def _integrate(curves, start, stop, direction, tol):
    field_ = curves.table.field
    k, u = _start_node(curves, start)
    umax = curves.mvc_star ** 2
    n = curves.table.n_intervals
    s = curves.s
    step = field_.forward_step if direction > 0 else field_.backward_step
    nodes = [k]
    us = [u]
    termination = "end"
    crossing = None
    boundary = n if direction > 0 else 0
    while k != boundary:
        v = step(k, u)
        kn = k + direction
        limit = None
        if stop is not None and v >= stop[kn] - tol.u:
            termination, limit = "intersect", stop
        elif v >= umax[kn] - tol.u:
            termination, limit = "mvc", umax
        if limit is not None:
            d0 = limit[k] - u
            d1 = limit[kn] - v
            t = d0 / (d0 - d1) if d0 - d1 > 0 else 0.0
            t = min(max(t, 0.0), 1.0)
            crossing = (float(s[k] + t * (s[kn] - s[k])), float(u + t * (v - u)))
            break
        if v <= tol.stall and kn != boundary:
            nodes.append(kn)
            us.append(0.0)
            termination = "stall"
            break
        k, u = kn, v
        nodes.append(k)
        us.append(u)
    nodes = np.array(nodes)
    return IntegrationResult(s[nodes], np.sqrt(np.maximum(us, 0.0)), nodes, termination, crossing)


def forward_integrate(curves: LimitCurves, start, stop=None, tol: Tolerances | None = None) -> IntegrationResult:
    """Integrate ``d(sd^2)/ds = 2 beta`` from a grid node toward ``s_e``.

    Stops before the first step that would reach ``stop`` (a node array of
    ``sd^2``) or the capped limit curve, when ``sd`` collapses to zero, or
    at ``s_e``.
    """
    tol = tol or Tolerances.for_curves(curves)
    return _integrate(curves, start, stop, +1, tol)


def backward_integrate(curves: LimitCurves, start, stop=None, tol: Tolerances | None = None) -> IntegrationResult:
    """Mirror of :func:`forward_integrate` with ``alpha`` toward ``s = 0``."""
    tol = tol or Tolerances.for_curves(curves)
    return _integrate(curves, start, stop, -1, tol)


def switch_search(curves: LimitCurves):
    """Switch points and switch arcs along the capped limit curve.

    Cruise arcs come straight from the partition of the ``eps`` line. Only
    the stretch where the limit curve sits below ``eps`` is scanned node by
    node for tangent, discontinuity and zero-inertia points.
    """
    table = curves.table
    s = curves.s
    eps = curves.epsilon
    star = curves.mvc_star
    arcs = [SwitchArc(a, b, "cruise") for a, b, _, _ in curves.cruise_arcs]
    points = []

    on_mvc = np.isfinite(curves.mvc) & (curves.mvc < eps)
    if on_mvc.any():
        slope = np.gradient(star, table.ds)
        below = np.maximum(star - 1e-3 * eps, 1e-3 * eps)
        alpha, beta = node_accel_bounds(table, below)
        follow = below * slope
        feasible = on_mvc & (follow >= alpha) & (follow <= beta)
        k = 0
        n = len(s)
        while k < n:
            if feasible[k]:
                j = k
                while j + 1 < n and feasible[j + 1]:
                    j += 1
                arcs.append(SwitchArc(float(s[k]), float(s[j]), "mvc"))
                k = j + 1
            else:
                k += 1

        accel_limited = on_mvc & (curves.mvc_a <= curves.mvc_v)
        h = slope - beta / below
        for k in np.flatnonzero(accel_limited[:-1] & accel_limited[1:]):
            if h[k] == 0.0 or np.sign(h[k]) != np.sign(h[k + 1]):
                t = h[k] / (h[k] - h[k + 1]) if h[k] != h[k + 1] else 0.0
                sp = s[k] + t * table.ds
                points.append(SwitchPoint(float(sp), float(np.interp(sp, s, star)), "tangent"))

    jumps = np.abs(np.diff(star))
    tol_jump = max(10.0 * float(np.median(jumps)), 1e-3 * curves.max_mvc)
    for k in np.flatnonzero(jumps > tol_jump):
        lo = k + 1 if star[k + 1] < star[k] else k
        points.append(SwitchPoint(float(s[lo]), float(star[lo]), "discontinuity"))

    A = table.A
    flips = (np.sign(A[:-1]) != np.sign(A[1:])) | (np.abs(A[1:]) <= table.tol_zi)
    for k in np.flatnonzero(flips.any(axis=1)):
        points.append(SwitchPoint(float(s[k + 1]), float(star[k + 1]), "zero-inertia"))

    points.sort(key=lambda p: p.s)
    arcs.sort(key=lambda a: a.s_start)
    return points, arcs


def segment_accel(curves: LimitCurves, tag: str, s: float, u: float) -> float:
    """Path acceleration a piece with provenance ``tag`` applies at ``(s, sd^2 = u)``."""
    lo, hi = curves.table.field.bounds(s, max(u, 0.0))
    if tag == TAG_ACCEL:
        return hi
    if tag == TAG_DECEL:
        return lo
    eps2 = curves.epsilon ** 2
    if abs(u - eps2) <= 1e-9 * eps2 and np.interp(s, curves.s, curves.cruise.astype(float)) > 0.0:
        return 0.0
    star2 = curves.mvc_star ** 2
    slope = np.interp(s, curves.s, np.gradient(star2, curves.table.ds))
    return float(min(max(0.5 * slope, lo), hi))


def node_accelerations(curves: LimitCurves, sd: np.ndarray, tags: np.ndarray) -> np.ndarray:
    alpha, beta = node_accel_bounds(curves.table, sd)
    sdd = np.zeros_like(sd)
    acc = tags == TAG_ACCEL
    dec = tags == TAG_DECEL
    sdd[acc] = beta[acc]
    sdd[dec] = alpha[dec]
    arc = tags == TAG_ARC
    if arc.any():
        eps = curves.epsilon
        star2 = curves.mvc_star ** 2
        slope = 0.5 * np.gradient(star2, curves.table.ds)
        tangent = np.clip(slope, alpha, np.maximum(alpha, beta))
        cruise = curves.cruise & (np.abs(sd - eps) <= 1e-9 * eps)
        sdd[arc] = np.where(cruise[arc], 0.0, tangent[arc])
    return sdd


def _runs_end(mask):
    """For each index, the last index of the run of ``True`` starting there."""
    mask = np.asarray(mask, dtype=bool)
    n = len(mask)
    # a run continues past k while mask[k] and mask[k+1]; it ends at the next break
    breaks = np.concatenate([np.flatnonzero(~(mask[:-1] & mask[1:])), [n - 1]])
    end = breaks[np.searchsorted(breaks, np.arange(n))]
    return end


def _backward_envelope(curves, u_end, tol, arc_start):
    s = curves.s
    n = curves.table.n_intervals
    umax = curves.mvc_star ** 2
    field_ = curves.table.field
    cruise = curves.cruise
    ub = np.full(n + 1, -np.inf)
    tags = np.full(n + 1, TAG_DECEL, dtype=object)
    hits = {}
    departures = []
    k = n
    ub[n] = min(u_end, umax[n])
    on_curve = u_end >= umax[n] - tol.u
    if on_curve:
        tags[n] = TAG_ARC
    while k > 0:
        if on_curve:
            if cruise[k] and cruise[k - 1]:
                k0 = arc_start[k]
                ub[k0:k] = umax[k0:k]
                tags[k0:k] = TAG_ARC
                k = k0
                continue
            v = field_.backward_step(k, ub[k])
            if v >= umax[k - 1] - tol.u:
                ub[k - 1] = umax[k - 1]
                tags[k - 1] = TAG_ARC
                k -= 1
                continue
            departures.append(SwitchPoint(float(s[k]), math.sqrt(ub[k]), "arc-endpoint-left"))
            on_curve = False
        seg = backward_integrate(curves, (s[k], math.sqrt(max(ub[k], 0.0))), tol=tol)
        nodes = seg.nodes[1:]
        ub[nodes] = seg.sd[1:] ** 2
        tags[nodes] = TAG_DECEL
        j = seg.last_node
        if seg.termination == "mvc":
            ub[j - 1] = umax[j - 1]
            tags[j - 1] = TAG_ARC
            hits[j - 1] = seg.crossing
            k = j - 1
            on_curve = True
        elif seg.termination == "stall":
            ub[:j] = 0.0
            break
        else:
            break
    return ub, tags, hits, departures


def check_boundary(curves: LimitCurves, sd_start: float, sd_end: float) -> None:
    """Raise if a boundary velocity sits above the capped limit curve."""
    tol = Tolerances.for_curves(curves)
    star = curves.mvc_star
    if sd_start > star[0] + tol.velocity:
        raise PlanningFailure("boundary-above-MVC*", f"start velocity {sd_start:.9g} > {star[0]:.9g}", 0.0)
    if sd_end > star[-1] + tol.velocity:
        raise PlanningFailure("boundary-above-MVC*", f"end velocity {sd_end:.9g} > {star[-1]:.9g}",
                              float(curves.s[-1]))


def construct_profile(curves: LimitCurves, sd_start: float, sd_end: float) -> PhaseProfile:
    """Time-optimal profile under the capped limit curve, or :class:`PlanningFailure`."""
    check_boundary(curves, sd_start, sd_end)
    tol = Tolerances.for_curves(curves)
    s = curves.s
    n = curves.table.n_intervals
    star = curves.mvc_star

    points, arcs = switch_search(curves)
    arc_start, arc_end = _arc_index(curves)
    u0 = min(sd_start ** 2, star[0] ** 2)
    ub, ubtags, hits, departures = _backward_envelope(curves, sd_end ** 2, tol, arc_start)
    if not np.isfinite(ub[0]) or u0 > ub[0] + tol.u:
        raise PlanningFailure("no-connection", "start velocity cannot be brought down in time", 0.0)

    decel_end = _runs_end(ubtags == TAG_DECEL)
    ride_end = _runs_end(ubtags == TAG_ARC)
    prof = np.empty(n + 1)
    tags = np.empty(n + 1, dtype=object)
    intersections = []
    prof[0] = u0
    following = u0 >= ub[0] - tol.u
    tags[0] = ubtags[0] if following else TAG_ACCEL
    k = 0
    while k < n:
        if not following:
            seg = forward_integrate(curves, (s[k], math.sqrt(prof[k])), stop=ub, tol=tol)
            nodes = seg.nodes[1:]
            prof[nodes] = seg.sd[1:] ** 2
            tags[nodes] = TAG_ACCEL
            j = seg.last_node
            if seg.termination == "stall":
                raise PlanningFailure("forward-stall", "accelerating profile stalled", float(s[j]))
            if seg.termination == "end":
                k = n
                break
            sc, uc = seg.crossing
            prof[j + 1] = ub[j + 1]
            tags[j + 1] = ubtags[j + 1]
            intersections.append(_intersection(curves, sc, uc, j, TAG_ACCEL, ubtags[j + 1]))
            following = True
            k = j + 1
            continue
        if ubtags[k] == TAG_DECEL:
            j = decel_end[k]
            if j > k:
                prof[k + 1:j + 1] = ub[k + 1:j + 1]
                tags[k + 1:j + 1] = TAG_DECEL
                k = j
                continue
            prof[k + 1] = ub[k + 1]
            tags[k + 1] = ubtags[k + 1]
            k += 1
            continue
        if curves.cruise[k] and curves.cruise[k + 1] and ubtags[k + 1] == TAG_ARC:
            j = min(arc_end[k], ride_end[k])
            prof[k + 1:j + 1] = ub[k + 1:j + 1]
            tags[k + 1:j + 1] = TAG_ARC
            k = j
            continue
        v = curves.table.field.forward_step(k, prof[k])
        if v < ub[k + 1] - tol.u:
            departures.append(SwitchPoint(float(s[k]), math.sqrt(prof[k]), "arc-endpoint-right"))
            following = False
            continue
        prof[k + 1] = ub[k + 1]
        tags[k + 1] = ubtags[k + 1]
        if ubtags[k + 1] == TAG_DECEL:
            sc, uc = hits.get(k, (float(s[k]), float(prof[k])))
            intersections.append(_intersection(curves, sc, uc, k, TAG_ARC, TAG_DECEL))
        k += 1

    if not following and prof[n] < sd_end ** 2 - tol.u:
        raise PlanningFailure("no-connection", "terminal velocity unreachable", float(s[-1]))
    if np.any(prof[1:n] <= tol.stall):
        k = 1 + int(np.argmax(prof[1:n] <= tol.stall))
        raise PlanningFailure("no-connection", "profile pinched to rest inside the path", float(s[k]))

    sd = np.sqrt(np.maximum(prof, 0.0))
    tags = tags.astype(str)
    sdd = node_accelerations(curves, sd, tags)
    points = sorted(points + departures, key=lambda p: p.s)
    corners = _ride_corners(curves, sd, sdd, tags)
    return PhaseProfile(s.copy(), sd, sdd, tags, curves, intersections, points, arcs, corners)


def _ride_corners(curves, sd, sdd, tags):
    """Kinks where a ride along the limit curve passes between the cruise line and the curve below it.

    The capped curve is the minimum of two curves, so these kinks always
    point upward and can be blended like intersections.
    """
    eps = curves.epsilon
    s = curves.s
    flat = curves.cruise & (np.abs(sd - eps) <= 1e-9 * eps)
    level = curves.mvc - eps
    out = []
    for k in np.flatnonzero((tags[:-1] == TAG_ARC) & (tags[1:] == TAG_ARC) & (flat[:-1] != flat[1:])):
        f0, f1 = level[k], level[k + 1]
        t = f0 / (f0 - f1) if np.isfinite(f0) and np.isfinite(f1) and f0 * f1 < 0 else 0.5
        sc = s[k] + t * (s[k + 1] - s[k])
        uc = sd[k] ** 2 + t * (sd[k + 1] ** 2 - sd[k] ** 2)
        out.append(Intersection(float(sc), math.sqrt(uc), int(k), TAG_ARC, TAG_ARC, float(sdd[k]), float(sdd[k + 1])))
    return out


def _intersection(curves, s, u, cell, left, right):
    return Intersection(
        float(s), math.sqrt(max(u, 0.0)), int(cell), left, right,
        float(segment_accel(curves, left, s, u)), float(segment_accel(curves, right, s, u)),
    )
