"""Time parameterization, actuator traces and trajectory metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import ArcLengthMap, BezierPath, config_derivatives
from .model import ConstraintTable, KinematicModel
from .planner import TAG_ARC, PhaseProfile

CRUISE_DEFINITION = "path-length fraction of cells held at constant velocity on a switch arc"


class DegenerateProfileError(ValueError):
    """Profile comes to rest strictly inside the path."""


@dataclass
class Trajectory:
    """Time-sampled trajectory; ``v`` and ``a`` have shape ``(len(t), m)``."""

    t: np.ndarray
    s: np.ndarray
    sd: np.ndarray
    sdd: np.ndarray
    v: np.ndarray | None = None
    a: np.ndarray | None = None
    cruise_proportion: float = float("nan")
    computation_time: float = float("nan")
    epsilon: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def traveling_time(self) -> float:
        return float(self.t[-1])

    def metrics(self) -> dict:
        out = {
            "traveling_time_s": self.traveling_time,
            "cruise_proportion": self.cruise_proportion,
            "comp_time_ms": 1e3 * self.computation_time,
            "epsilon": self.epsilon,
        }
        out.update(self.extra)
        return out


def cell_durations(s, sd):
    """Time to cross each grid cell at constant path acceleration.

    With ``sd^2`` linear across a cell the exact duration is
    ``2 ds / (sd_k + sd_k+1)``, which stays finite when one end is at rest.
    """
    s = np.asarray(s, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd[1:-1] <= 0.0):
        k = 1 + int(np.argmax(sd[1:-1] <= 0.0))
        raise DegenerateProfileError(f"path velocity is zero inside the path at s={s[k]:.9g}")
    total = sd[:-1] + sd[1:]
    if np.any(total <= 0.0):
        raise DegenerateProfileError("path velocity is zero across a whole cell")
    return 2.0 * np.diff(s) / total


def time_reparameterize(profile: PhaseProfile) -> Trajectory:
    dt = cell_durations(profile.s, profile.sd)
    t = np.concatenate([[0.0], np.cumsum(dt)])
    return Trajectory(t, profile.s.copy(), profile.sd.copy(), profile.sdd.copy(),
                      epsilon=profile.curves.epsilon)


def traveling_time(profile: PhaseProfile) -> float:
    return float(np.sum(cell_durations(profile.s, profile.sd)))


def actuator_traces(traj: Trajectory, model: KinematicModel, path: BezierPath, amap: ArcLengthMap):
    """``v = J q_s sd`` and ``a = J q_s sdd + (J_s q_s + J q_ss) sd^2`` from the model itself."""
    q, q_s, q_ss = config_derivatives(path, amap, traj.s)
    v, a = [], []
    for k in range(len(traj.s)):
        J = np.asarray(model.jacobian(q[k]), dtype=float)
        J_s = np.asarray(model.jacobian_s(q[k], q_s[k]), dtype=float)
        jq = J @ q_s[k]
        jb = J_s @ q_s[k] + J @ q_ss[k]
        v.append(jq * traj.sd[k])
        a.append(jq * traj.sdd[k] + jb * traj.sd[k] ** 2)
    return np.array(v), np.array(a)


def table_traces(traj: Trajectory, table: ConstraintTable):
    """Actuator traces from the first half of the constraint rows."""
    m = table.m
    A = np.array([np.interp(traj.s, table.s, table.A[:, i]) for i in range(m)]).T
    B = np.array([np.interp(traj.s, table.s, table.B[:, i]) for i in range(m)]).T
    return A * traj.sd[:, None], A * traj.sdd[:, None] + B * (traj.sd ** 2)[:, None]


def constraint_violation(v, a, v_max, a_max) -> float:
    """Largest amount by which any trace exceeds its bound (negative if all strict)."""
    return float(max(np.max(np.abs(v) - v_max), np.max(np.abs(a) - a_max)))


def cruise_proportion(profile: PhaseProfile, tol_cruise: float | None = None) -> float:
    """Share of the path length covered at constant velocity along switch arcs."""
    table = profile.curves.table
    if tol_cruise is None:
        tol_cruise = 1e-3 * float(np.max(table.a_max))
    flat = (profile.tags == TAG_ARC) & (np.abs(profile.sdd) <= tol_cruise)
    cells = flat[:-1] & flat[1:]
    return float(np.sum(np.diff(profile.s)[cells]) / table.length)


def metrics(traj: Trajectory, profile: PhaseProfile):
    """``(traveling_time, cruise_proportion)``."""
    return traj.traveling_time, cruise_proportion(profile)
