"""Phase-plane trajectory planning with a tunable cruise velocity."""

from .estimator import PlanResult, TrajectoryPlanner, plan_once
from .geometry import BezierPath, build_arclength_map, config_derivatives
from .limits import EpsilonRangeError, precompute_limits, reconstruct
from .model import ActuatorLimits, ConstraintTable, DiffCasterModel, UnitModel, build_constraint_table
from .planner import PhaseProfile, PlanningFailure, construct_profile, switch_search
from .smoother import SmoothingError, smooth_all
from .trajectory import Trajectory, time_reparameterize

__all__ = [
    "ActuatorLimits", "BezierPath", "ConstraintTable", "DiffCasterModel", "EpsilonRangeError", "PhaseProfile",
    "PlanResult", "PlanningFailure", "SmoothingError", "Trajectory", "TrajectoryPlanner", "UnitModel",
    "build_arclength_map", "build_constraint_table", "config_derivatives", "construct_profile", "plan_once",
    "precompute_limits", "reconstruct", "smooth_all", "switch_search", "time_reparameterize",
]
