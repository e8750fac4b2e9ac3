"""Estimator-style front end: fit once per path, replan for any cruise velocity."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import BezierPath, ZeroLengthPathError, build_arclength_map
from .limits import EpsilonRangeError, VelocityLimits, precompute_limits, reconstruct
from .model import ActuatorLimits, ConstraintTable, KinematicModel, build_constraint_table, make_model
from .planner import PhaseProfile, PlanningFailure, check_boundary, construct_profile
from .smoother import smooth_all
from .trajectory import (
    CRUISE_DEFINITION, Trajectory, actuator_traces, cruise_proportion, table_traces, time_reparameterize,
)
from .validation import (
    check_control_points, check_grid, check_limit_vector, check_path_coordinates, check_velocity,
)


@dataclass
class PlanResult:
    """Everything one planning query produces."""

    raw: PhaseProfile
    profile: PhaseProfile
    trajectory: Trajectory
    cni_time: float
    bio_time: float


def plan_once(limits: VelocityLimits, epsilon: float, sd_start: float = 0.0, sd_end: float = 0.0,
              window: float | None = None, smooth: bool = True) -> PlanResult:
    """Reconstruct the capped curve, integrate and blend. Timings exclude precomputation.

    Boundary velocities above the capped curve are reported as a planning
    failure before ``epsilon`` is checked against its admissible interval.
    """
    t0 = time.perf_counter()
    curves = reconstruct(limits, epsilon, sd_start, sd_end, check=False)
    check_boundary(curves, sd_start, sd_end)
    lo, hi = limits.epsilon_range(sd_start, sd_end)
    if not lo <= epsilon <= hi:
        raise EpsilonRangeError(epsilon, lo, hi)
    raw = construct_profile(curves, sd_start, sd_end)
    t1 = time.perf_counter()
    profile = smooth_all(raw, window) if smooth else raw
    t2 = time.perf_counter()
    traj = time_reparameterize(profile)
    traj.cruise_proportion = cruise_proportion(profile)
    traj.computation_time = t2 - t0
    traj.extra = {"cni_time_ms": 1e3 * (t1 - t0), "bio_time_ms": 1e3 * (t2 - t1)}
    return PlanResult(raw, profile, traj, t1 - t0, t2 - t1)


class TrajectoryPlanner(BaseEstimator):
    """Plan an acceleration-continuous trajectory along a cubic Bezier path.

    ``fit`` builds the constraint table and the cruise-independent limit
    curves, then plans for ``epsilon`` (``None`` means the fastest admissible
    value). :meth:`replan` reuses the precomputation for another ``epsilon``.

    Parameters
    ----------
    model : str or KinematicModel
    v_max, a_max : float or array-like
        Actuator bounds; scalars broadcast over actuators.
    epsilon : float or None
        Cruise velocity cap.
    start_velocity, end_velocity : float
    n_grid : int
        Number of grid intervals along the path.
    window : float or None
        Blend half-width; ``None`` picks ``max(8 ds, 0.01 s_e)``.
    orientation : bool
        Append the linear heading row to the configuration.
    smooth : bool
        Blend acceleration jumps after integration.
    """

    def __init__(self, model="unit", v_max=1.0, a_max=1.0, epsilon=None, start_velocity=0.0,
                 end_velocity=0.0, n_grid=1000, window=None, orientation=False, smooth=True):
        self.model = model
        self.v_max = v_max
        self.a_max = a_max
        self.epsilon = epsilon
        self.start_velocity = start_velocity
        self.end_velocity = end_velocity
        self.n_grid = n_grid
        self.window = window
        self.orientation = orientation
        self.smooth = smooth

    def _model(self) -> KinematicModel:
        return make_model(self.model) if isinstance(self.model, str) else self.model

    def fit(self, X, y=None):
        """Precompute for the path ``X`` and plan once.

        ``X`` is a :class:`BezierPath`, a ``(4, dim)`` control-point array or
        a ready :class:`ConstraintTable`. Raises :class:`PlanningFailure`
        when no trajectory exists.
        """
        sd0 = check_velocity(self.start_velocity, "start_velocity")
        sde = check_velocity(self.end_velocity, "end_velocity")
        t0 = time.perf_counter()
        if isinstance(X, ConstraintTable):
            self.path_ = self.arclength_ = None
            self.table_ = X
        else:
            if isinstance(X, BezierPath):
                path = X
            else:
                path = BezierPath(check_control_points(X), orientation=self.orientation)
            n_grid = check_grid(self.n_grid)
            try:
                amap = build_arclength_map(path, 8 * n_grid)
            except ZeroLengthPathError as exc:
                raise PlanningFailure("degenerate-path", str(exc), 0.0) from exc
            limits = ActuatorLimits(check_limit_vector(self.v_max, "v_max"), check_limit_vector(self.a_max, "a_max"))
            self.path_, self.arclength_ = path, amap
            self.table_ = build_constraint_table(self._model(), limits, path, amap, n_grid)
        self.limits_ = precompute_limits(self.table_)
        self.precompute_time_ = time.perf_counter() - t0
        self.epsilon_range_ = self.limits_.epsilon_range(sd0, sde)
        self.replan(self.epsilon)
        return self

    def replan(self, epsilon=None):
        """Plan again for ``epsilon`` with the stored precomputation; returns the trajectory."""
        eps = self.limits_.max_mvc if epsilon is None else float(epsilon)
        res = plan_once(self.limits_, eps, float(self.start_velocity), float(self.end_velocity),
                        self.window, self.smooth)
        traj = res.trajectory
        if self.path_ is not None:
            traj.v, traj.a = actuator_traces(traj, self._model(), self.path_, self.arclength_)
        else:
            traj.v, traj.a = table_traces(traj, self.table_)
        traj.extra.update({"precompute_time_ms": 1e3 * self.precompute_time_,
                           "cruise_definition": CRUISE_DEFINITION})
        self.result_ = res
        self.raw_profile_ = res.raw
        self.profile_ = res.profile
        self.trajectory_ = traj
        return traj

    def predict(self, s):
        """Path velocity at path coordinates ``s``."""
        s = check_path_coordinates(s, self.table_.length)
        return self.profile_.velocity_at(s)

    def transform(self, s):
        """Columns ``(t, sd, sdd)`` interpolated at path coordinates ``s``."""
        s = check_path_coordinates(s, self.table_.length)
        traj = self.trajectory_
        return np.column_stack([np.interp(s, traj.s, traj.t), self.profile_.velocity_at(s),
                                np.interp(s, traj.s, traj.sdd)])

    def score(self, X=None, y=None):
        """Negative traveling time, so larger is better."""
        return -self.trajectory_.traveling_time
