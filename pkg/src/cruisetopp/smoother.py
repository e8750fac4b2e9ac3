"""Acceleration-continuous blending at profile intersections.

Around an intersection ``p1`` the bang-bang profile is replaced on
``[s2, s3]`` by two integrations of the blended field

    g(s, sd) = alpha + (beta - alpha) * (d1 + t * (d2 - d1)),   t = (s - s2) / (s3 - s2)

where ``d1`` and ``d2`` locate the original profile's acceleration inside
``[alpha, beta]`` at the window edges. ``l1`` runs forward from ``p2`` and
``l2`` backward from ``p3``; both stop at ``s1``. Both pieces integrate the
same field, so they can only meet if ``l1`` passes through ``p3``. The
right edge ``s3`` is therefore root-found so the pieces meet at ``s1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .planner import TAG_ARC, TAG_BLEND, PhaseProfile, Tolerances, segment_accel

MAX_SHRINKS = 8


class SmoothingError(RuntimeError):
    """No admissible blend could be found around an intersection."""

    def __init__(self, s: float, detail: str = ""):
        self.s = s
        super().__init__(f"smoothing failed at s={s:.9g}" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class SmoothingWindow:
    """One blend. Points are ``(s, sd)`` pairs; ``l1``/``l2`` hold ``(s, sd)`` arrays."""

    p1: tuple
    p2: tuple
    p3: tuple
    sdd_p2: float
    sdd_p3: float
    delta1: float
    delta2: float
    l1: tuple
    l2: tuple
    accel_left: float
    accel_right: float

    @property
    def gap(self) -> float:
        """Velocity mismatch of ``l1`` and ``l2`` at ``s1``."""
        return abs(self.l1[1][-1] - self.l2[1][-1])

    @property
    def accel_jump(self) -> float:
        return abs(self.accel_right - self.accel_left)


def blend_fraction(sdd, lo, hi, tol):
    """Position of ``sdd`` in ``[lo, hi]``; 0.5 when the interval has pinched."""
    if hi - lo < tol:
        return 0.5
    return min(max((sdd - lo) / (hi - lo), 0.0), 1.0)


def blend_fields(window: SmoothingWindow, field, s: float, sd: float):
    """``(beta*, alpha*)`` at ``(s, sd)`` for the window's blend fractions."""
    lo, hi = field.bounds(s, sd * sd)
    return lo + (hi - lo) * window.delta1, lo + (hi - lo) * window.delta2


def _blend(field, s2, s3, d1, d2):
    span = s3 - s2
    s0, ds, n, tol = field.s0, field.ds, field.n, field.table.tol_zi
    split = field.cell_split
    inf = math.inf

    def accel(s, u):
        # inlined form of ``field.bounds``; this runs in the innermost loop
        x = (s - s0) / ds
        k = min(max(int(x), 0), n - 1)
        f = x - k
        lo, hi = -inf, inf
        upper, lower, mixed = split(k)
        for a0, da, b0, db, c0, dc in upper:
            r = (-(b0 + f * db) * u - (c0 + f * dc)) / (a0 + f * da)
            if r < hi:
                hi = r
        for a0, da, b0, db, c0, dc in lower:
            r = (-(b0 + f * db) * u - (c0 + f * dc)) / (a0 + f * da)
            if r > lo:
                lo = r
        for a0, da, b0, db, c0, dc in mixed:
            a = a0 + f * da
            if -tol <= a <= tol:
                continue
            r = (-(b0 + f * db) * u - (c0 + f * dc)) / a
            if a > 0:
                if r < hi:
                    hi = r
            elif r > lo:
                lo = r
        return lo + (hi - lo) * (d1 + (s - s2) / span * (d2 - d1))

    return accel


def _march(field, accel, s_from, u_from, s_to, nodes):
    """Midpoint-integrate ``du/ds = 2 accel`` through the grid ``nodes`` between two points."""
    s_pts = [s_from]
    u_pts = [u_from]
    s, u = s_from, u_from
    eps_h = 1e-12 * field.ds
    for x in list(nodes) + [s_to]:
        h = x - s
        if -eps_h <= h <= eps_h:
            continue
        um = u + h * accel(s, u)
        u = u + 2.0 * h * accel(s + 0.5 * h, um if um > 0.0 else 0.0)
        if u < 0.0:
            u = 0.0
        s = x
        s_pts.append(s)
        u_pts.append(u)
    return np.array(s_pts), np.array(u_pts)


def _piece_extent(profile: PhaseProfile, k: int, tag: str, step: int) -> int:
    """Last node of the run of ``tag`` through node ``k`` in direction ``step``."""
    tags = profile.tags
    if step < 0:
        other = np.flatnonzero(tags[:k + 1] != tag)
        return int(other[-1]) + 1 if other.size else 0
    other = np.flatnonzero(tags[k:] != tag)
    return k + int(other[0]) - 1 if other.size else len(tags) - 1


def _secant(f, x0, lo, hi, ftol, xtol, iters=10):
    """Secant iteration kept inside ``(lo, hi]``; ``None`` if it does not settle."""
    f0 = f(x0)
    if abs(f0) <= ftol:
        return x0
    x1 = x0 + 1e-2 * (x0 - lo)
    if x1 > hi:
        x1 = x0 - 1e-2 * (x0 - lo)
    f1 = f(x1)
    for _ in range(iters):
        if abs(f1) <= ftol:
            return x1
        if f1 == f0:
            return None
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not (lo < x2 <= hi):
            return None
        x0, f0 = x1, f1
        x1, f1 = x2, f(x2)
        if abs(x1 - x0) <= xtol and abs(f1) <= 1e3 * ftol:
            return x1
    return x1 if abs(f1) <= ftol else None


def _bracket(f, xs, start):
    """Search outward from ``xs[start]`` for adjacent samples where ``f`` changes sign."""
    vals = {start: f(xs[start])}
    if vals[start] == 0.0:
        return xs[start], xs[start]
    lo = hi = start
    while lo > 0 or hi < len(xs) - 1:
        if hi < len(xs) - 1:
            hi += 1
            vals[hi] = f(xs[hi])
            if vals[hi] == 0.0 or vals[hi] * vals[hi - 1] < 0.0:
                return xs[hi - 1], xs[hi]
        if lo > 0:
            lo -= 1
            vals[lo] = f(xs[lo])
            if vals[lo] == 0.0 or vals[lo] * vals[lo + 1] < 0.0:
                return xs[lo], xs[lo + 1]
    return None


def _edge_state(profile, curves, tag, s, crossing, cell):
    """Velocity and acceleration of the piece ``tag`` at ``s``.

    Node values are interpolated, except inside the crossing cell where the
    piece is evaluated directly from the crossing.
    """
    if profile.s[cell] < s < profile.s[cell + 1]:
        s1, u1 = crossing
        if tag == TAG_ARC:
            u = float(np.interp(s, curves.s, curves.mvc_star ** 2))
        else:
            u = max(curves.table.field.step(s1, u1, s - s1, lambda x, v: segment_accel(curves, tag, x, v)), 0.0)
    else:
        u = float(np.interp(s, profile.s, profile.u))
    return u, segment_accel(curves, tag, s, u)


def bio(profile: PhaseProfile, intersection, half_width: float, limits=(None, None)):
    """Blend around one intersection.

    Returns ``(window, nodes, u_values, field)`` for the grid nodes strictly
    inside the window, or ``None`` when there is no room on one side.
    Window edges need not sit on grid nodes.

    ``limits`` optionally bounds the window edges (set by neighbouring
    intersections). The window is halved until the blend stays below the
    capped limit curve.
    """
    if half_width <= 0.0:
        return None
    curves = profile.curves
    field = curves.table.field
    s = profile.s
    ds = curves.table.ds
    tol = Tolerances.for_curves(curves)
    s1 = intersection.s
    u1 = intersection.sd ** 2
    left_tag, right_tag = intersection.left_tag, intersection.right_tag
    kc = intersection.cell
    k_lo = _piece_extent(profile, kc, left_tag, -1) if profile.tags[kc] == left_tag else kc
    k_hi = _piece_extent(profile, kc + 1, right_tag, +1) if profile.tags[kc + 1] == right_tag else kc + 1
    left_room = s1 - max(s[k_lo], limits[0] if limits[0] is not None else -np.inf)
    right_room = min(s[k_hi], limits[1] if limits[1] is not None else np.inf) - s1
    umax = curves.mvc_star ** 2

    w = min(half_width, left_room, right_room)
    if w <= 1e-12 * ds:
        return None
    last = "window collapsed"
    for _ in range(MAX_SHRINKS + 1):
        s2 = s1 - w
        u2, sdd2 = _edge_state(profile, curves, left_tag, s2, (s1, u1), kc)
        lo2, hi2 = field.bounds(s2, u2)
        d1 = blend_fraction(sdd2, lo2, hi2, tol.accel)
        left_nodes = s[(s > s2) & (s < s1)]

        memo = {}

        def pieces(s3):
            if s3 in memo:
                return memo[s3]
            u3, sdd3 = _edge_state(profile, curves, right_tag, s3, (s1, u1), kc)
            lo3, hi3 = field.bounds(s3, u3)
            d2 = blend_fraction(sdd3, lo3, hi3, tol.accel)
            g = _blend(field, s2, s3, d1, d2)
            l1 = _march(field, g, s2, u2, s1, left_nodes)
            mask = (s > s1) & (s < s3)
            l2 = _march(field, g, s3, u3, s1, s[mask][::-1])
            if len(memo) >= 3:
                memo.pop(next(iter(memo)))
            memo[s3] = (l1, l2, d2, g, u3, sdd3)
            return memo[s3]

        def mismatch(s3):
            l1, l2 = pieces(s3)[:2]
            return l1[1][-1] - l2[1][-1]

        s3_max = s1 + min(right_room, 4.0 * w)
        ftol = 1e-9 * u1 + 1e-3 * tol.u
        root = _secant(mismatch, s1 + min(w, s3_max - s1), s1, s3_max, ftol, 1e-12 * s[-1])
        if root is None:
            xs = sorted({min(s1 + f * w, s3_max) for f in (0.25, 0.5, 1.0, 2.0, 3.0, 4.0)})
            xs = [x for x in xs if x > s1 + 1e-9 * ds]
            found = _bracket(mismatch, xs, int(np.argmin([abs(x - s1 - w) for x in xs]))) if xs else None
            if found is None:
                last = "blend pieces do not meet"
                w *= 0.5
                continue
            a, b = found
            root = a if a == b else brentq(mismatch, a, b, xtol=1e-13 * max(1.0, s[-1]), rtol=1e-13)
        s3 = float(root)
        (ls1, lu1), (ls2, lu2), d2, g, u3, sdd3 = pieces(s3)
        # a sign change across a discontinuity is not a meeting point
        if abs(lu1[-1] - lu2[-1]) > 1e3 * ftol:
            last = "blend pieces do not meet"
            w *= 0.5
            continue
        # the junction itself belongs to the blend when it falls on a grid node
        on_node = abs((s1 - s[0]) / ds - round((s1 - s[0]) / ds)) <= 1e-9
        left_end = None if on_node else -1
        nodes = np.concatenate([ls1[1:left_end], ls2[1:-1][::-1]])
        vals = np.concatenate([lu1[1:left_end], lu2[1:-1][::-1]])
        cap = np.interp(nodes, s, umax)
        if np.any(vals > cap + tol.u) or np.any(vals <= tol.stall):
            last = "blend leaves the admissible region"
            w *= 0.5
            continue
        window = SmoothingWindow(
            p1=(s1, math.sqrt(u1)), p2=(s2, math.sqrt(u2)), p3=(s3, math.sqrt(u3)),
            sdd_p2=float(sdd2), sdd_p3=float(sdd3), delta1=float(d1), delta2=float(d2),
            l1=(ls1, np.sqrt(lu1)), l2=(ls2, np.sqrt(lu2)),
            accel_left=float(g(s1, lu1[-1])), accel_right=float(g(s1, lu2[-1])),
        )
        return window, nodes, vals, g
    raise SmoothingError(s1, last)


def default_half_width(profile: PhaseProfile) -> float:
    ds = profile.curves.table.ds
    return max(8.0 * ds, 0.01 * profile.curves.table.length)


def smooth_all(profile: PhaseProfile, half_width: float | None = None) -> PhaseProfile:
    """Blend every intersection and ride corner whose acceleration jump exceeds the tolerance."""
    out = profile.copy()
    tol = Tolerances.for_curves(profile.curves)
    w = default_half_width(profile) if half_width is None else float(half_width)
    sites = sorted((p for p in profile.intersections + profile.corners if p.jump > tol.accel), key=lambda p: p.s)
    if not sites:
        return out
    windows = []
    s = out.s
    u = out.u.copy()
    for i, p in enumerate(sites):
        left = 0.5 * (sites[i - 1].s + p.s) if i > 0 else None
        right = 0.5 * (p.s + sites[i + 1].s) if i + 1 < len(sites) else None
        res = bio(profile, p, w, (left, right))
        if res is None:
            continue
        window, nodes, vals, g = res
        idx = np.rint((nodes - s[0]) / profile.curves.table.ds).astype(int)
        u[idx] = vals
        out.tags[idx] = TAG_BLEND
        out.sdd[idx] = [g(x, v) for x, v in zip(nodes, vals)]
        windows.append(window)
    out.sd = np.sqrt(np.maximum(u, 0.0))
    out.windows = windows
    return out

