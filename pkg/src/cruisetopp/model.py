"""Kinematic models and the phase-plane constraint table.

Actuator box constraints ``|v| <= v_max`` and ``|a| <= a_max`` with
``v = J q_s sd`` and ``a = J q_s sdd + (J_s q_s + J q_ss) sd^2`` become the
stacked linear rows::

    A(s) sd + D(s) <= 0
    A(s) sdd + B(s) sd^2 + C(s) <= 0

sampled on a uniform grid in ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import ArcLengthMap, BezierPath, config_derivatives


class ModelError(ValueError):
    """Kinematic model evaluation failed or is inconsistent with the path."""


class MalformedConstraintError(ValueError):
    """No row bounds the path acceleration from one side."""


class KinematicModel:
    """Interface for ``v = J(q) qdot`` style first-order models.

    Subclasses implement :meth:`jacobian` and :meth:`jacobian_s`; the latter
    is ``dJ(q(s))/ds`` given the path tangent ``q_s``.
    """

    n_state: int | None = None
    n_actuators: int | None = None

    def jacobian(self, q):
        raise NotImplementedError

    def jacobian_s(self, q, q_s):
        raise NotImplementedError

    def check_dim(self, n: int) -> None:
        if self.n_state is not None and self.n_state != n:
            raise ModelError(
                f"{type(self).__name__} expects a {self.n_state}-dimensional "
                f"configuration, path provides {n}"
            )


class UnitModel(KinematicModel):
    """Identity Jacobian: each actuator drives one configuration coordinate."""

    def __init__(self, dim: int | None = None):
        self.n_state = dim
        self.n_actuators = dim

    def jacobian(self, q):
        return np.eye(len(q))

    def jacobian_s(self, q, q_s):
        return np.zeros((len(q), len(q)))

    def __repr__(self):
        return f"UnitModel(dim={self.n_state})"


class DiffCasterModel(KinematicModel):
    """Two-actuator toy model on ``q = (x, y, theta)``.

    Actuator velocities are the body-frame velocities of a point mounted at
    lever arm ``offset``::

        v1 =  cos(theta) xd + sin(theta) yd + offset * thetad
        v2 = -sin(theta) xd + cos(theta) yd - offset * thetad
    """

    n_state = 3
    n_actuators = 2

    def __init__(self, offset: float = 0.2):
        self.offset = float(offset)

    def jacobian(self, q):
        c, s = np.cos(q[2]), np.sin(q[2])
        r = self.offset
        return np.array([[c, s, r], [-s, c, -r]])

    def jacobian_s(self, q, q_s):
        c, s = np.cos(q[2]), np.sin(q[2])
        return q_s[2] * np.array([[-s, c, 0.0], [-c, -s, 0.0]])

    def __repr__(self):
        return f"DiffCasterModel(offset={self.offset})"


MODELS = {"unit": UnitModel, "diffcaster": DiffCasterModel}


def make_model(name: str) -> KinematicModel:
    try:
        return MODELS[name]()
    except KeyError:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


@dataclass(frozen=True)
class ActuatorLimits:
    """Symmetric velocity and acceleration bounds per actuator."""

    v_max: np.ndarray
    a_max: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.v_max, dtype=float))
        a = np.atleast_1d(np.asarray(self.a_max, dtype=float))
        if v.shape != a.shape or v.ndim != 1:
            raise ValueError(f"v_max and a_max must be vectors of equal length, got {v.shape} and {a.shape}")
        if not (np.all(np.isfinite(v)) and np.all(v > 0)):
            raise ValueError("all entries of v_max must be strictly positive")
        if not (np.all(np.isfinite(a)) and np.all(a > 0)):
            raise ValueError("all entries of a_max must be strictly positive")
        object.__setattr__(self, "v_max", v)
        object.__setattr__(self, "a_max", a)

    @property
    def m(self) -> int:
        return len(self.v_max)

    def resized(self, m: int) -> "ActuatorLimits":
        """Broadcast length-1 limits to ``m`` actuators."""
        if self.m == m:
            return self
        if self.m == 1:
            return ActuatorLimits(np.full(m, self.v_max[0]), np.full(m, self.a_max[0]))
        raise ModelError(f"limits have {self.m} entries but the model has {m} actuators")


@dataclass(frozen=True)
class ConstraintTable:
    """Rows ``A, B, C, D`` of shape ``(N+1, 2m)`` on the grid ``s``.

    Between grid nodes, ``A``, ``B`` and ``C`` are interpolated linearly.
    """

    s: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    a_max: np.ndarray
    v_max: np.ndarray
    tol_zi: float

    @classmethod
    def from_rows(cls, s, A, B, C, D, tol_zi=None):
        s = np.asarray(s, dtype=float)
        A, B, C, D = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, C, D))
        if not (A.shape == B.shape == C.shape == D.shape and A.shape[0] == len(s)):
            raise ValueError("A, B, C, D must share shape (len(s), 2m)")
        if len(s) < 2 or np.any(np.diff(s) <= 0):
            raise ValueError("grid must be strictly increasing with at least 2 nodes")
        if not np.allclose(np.diff(s), (s[-1] - s[0]) / (len(s) - 1), rtol=1e-9, atol=0.0):
            raise ValueError("grid must be uniform")
        if np.any(C > 0) or np.any(D > 0):
            raise ValueError("C and D must be non-positive")
        if tol_zi is None:
            tol_zi = 1e-8 * max(np.max(np.abs(A)), 1e-300)
        m = A.shape[1] // 2
        return cls(s, A, B, C, D, -C[0, :m].copy(), -D[0, :m].copy(), float(tol_zi))

    @classmethod
    def from_halves(cls, s, jq, jb, v_max, a_max):
        """Stack ``[x, -x]`` halves from ``J q_s`` and ``J_s q_s + J q_ss`` samples."""
        jq = np.asarray(jq, dtype=float).reshape(len(s), -1)
        jb = np.asarray(jb, dtype=float).reshape(len(s), -1)
        m = jq.shape[1]
        v_max = np.broadcast_to(np.asarray(v_max, dtype=float), (m,))
        a_max = np.broadcast_to(np.asarray(a_max, dtype=float), (m,))
        n = len(s)
        A = np.hstack([jq, -jq])
        B = np.hstack([jb, -jb])
        C = np.tile(-np.concatenate([a_max, a_max]), (n, 1))
        D = np.tile(-np.concatenate([v_max, v_max]), (n, 1))
        return cls.from_rows(s, A, B, C, D)

    @property
    def n_intervals(self) -> int:
        return len(self.s) - 1

    @property
    def m(self) -> int:
        return self.A.shape[1] // 2

    @property
    def length(self) -> float:
        return float(self.s[-1] - self.s[0])

    @property
    def ds(self) -> float:
        return self.length / self.n_intervals

    def rows_at(self, s):
        """Linearly interpolated ``(A, B, C)`` rows at a single ``s``."""
        if s < self.s[0] - 1e-12 * self.length or s > self.s[-1] + 1e-12 * self.length:
            raise ValueError(f"s={s} outside [{self.s[0]}, {self.s[-1]}]")
        x = (s - self.s[0]) / self.ds
        k = min(max(int(x), 0), self.n_intervals - 1)
        f = x - k
        A = self.A[k] + f * (self.A[k + 1] - self.A[k])
        B = self.B[k] + f * (self.B[k + 1] - self.B[k])
        C = self.C[k] + f * (self.C[k + 1] - self.C[k])
        return A, B, C

    @cached_property
    def field(self) -> "PhaseField":
        return PhaseField(self)

    def accel_bounds(self, s, sd):
        """``(alpha, beta)`` at one phase point."""
        A, B, C = self.rows_at(s)
        ratio_num = -B * sd * sd - C
        lo = A < -self.tol_zi
        hi = A > self.tol_zi
        if not lo.any() or not hi.any():
            raise MalformedConstraintError(f"no two-sided acceleration bound at s={s}")
        return float(np.max(ratio_num[lo] / A[lo])), float(np.min(ratio_num[hi] / A[hi]))


def alpha(table: ConstraintTable, s, sd) -> float:
    """Largest lower bound on the path acceleration at ``(s, sd)``."""
    return table.accel_bounds(s, sd)[0]


def beta(table: ConstraintTable, s, sd) -> float:
    """Smallest upper bound on the path acceleration at ``(s, sd)``."""
    return table.accel_bounds(s, sd)[1]


def build_constraint_table(model: KinematicModel, limits: ActuatorLimits, path: BezierPath,
                           amap: ArcLengthMap, n_grid: int = 1000) -> ConstraintTable:
    """Sample ``A, B, C, D`` at ``n_grid + 1`` uniformly spaced path coordinates."""
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")
    s = np.linspace(0.0, amap.total_length, n_grid + 1)
    q, q_s, q_ss = config_derivatives(path, amap, s)
    model.check_dim(q.shape[1])

    jq_rows, jb_rows = [], []
    for k in range(len(s)):
        J = np.asarray(model.jacobian(q[k]), dtype=float)
        J_s = np.asarray(model.jacobian_s(q[k], q_s[k]), dtype=float)
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(J_s))):
            raise ModelError(f"non-finite Jacobian entry at s={s[k]:.9g}")
        if J.shape[1] != q.shape[1]:
            raise ModelError(f"Jacobian has {J.shape[1]} columns, configuration has {q.shape[1]} rows")
        jq_rows.append(J @ q_s[k])
        jb_rows.append(J_s @ q_s[k] + J @ q_ss[k])
    jq = np.array(jq_rows)
    limits = limits.resized(jq.shape[1])
    return ConstraintTable.from_halves(s, jq, np.array(jb_rows), limits.v_max, limits.a_max)


class PhaseField:
    """Scalar ``alpha``/``beta`` evaluation tuned for integration loops.

    In ``u = sd^2`` every admissible row is affine, ``p * u + q``. Rows are
    pre-split per half-grid point (nodes and cell midpoints) so a midpoint
    step from node to node needs no interpolation. Off-grid queries go
    through :meth:`bounds`.
    """

    def __init__(self, table: ConstraintTable):
        self.table = table
        self.n = table.n_intervals
        self.s0 = float(table.s[0])
        self.ds = table.ds
        tol = table.tol_zi

        def halfgrid(x):
            out = np.empty((2 * len(x) - 1, x.shape[1]))
            out[0::2] = x
            out[1::2] = 0.5 * (x[:-1] + x[1:])
            return out

        A, B, C = halfgrid(table.A), halfgrid(table.B), halfgrid(table.C)
        self._beta_rows = []
        self._alpha_rows = []
        for a, b, c in zip(A, B, C):
            self._beta_rows.append([(-bi / ai, -ci / ai) for ai, bi, ci in zip(a, b, c) if ai > tol])
            self._alpha_rows.append([(-bi / ai, -ci / ai) for ai, bi, ci in zip(a, b, c) if ai < -tol])
        # per cell: (a0, da, b0, db, c0, dc) for every row, for linear interpolation inside the cell
        dA, dB, dC = (np.diff(x, axis=0) for x in (table.A, table.B, table.C))
        self._cell_rows = [
            list(zip(*cols))
            for cols in zip(table.A[:-1].tolist(), dA.tolist(), table.B[:-1].tolist(), dB.tolist(),
                            table.C[:-1].tolist(), dC.tolist())
        ]
        # same rows grouped by the sign of ``a`` over the whole cell; rows that
        # change sign or touch zero inside the cell stay in the mixed group
        self._cell_split = []
        for rows in self._cell_rows:
            upper, lower, mixed = [], [], []
            for row in rows:
                a0, da = row[0], row[1]
                lo_a, hi_a = min(a0, a0 + da), max(a0, a0 + da)
                if lo_a > tol:
                    upper.append(row)
                elif hi_a < -tol:
                    lower.append(row)
                else:
                    mixed.append(row)
            self._cell_split.append((tuple(upper), tuple(lower), tuple(mixed)))
        self._tol = tol
        self._mid_cap = None

    def set_midpoint_caps(self, u_cap) -> None:
        """Clamp midpoint states to ``u_cap`` (``sd^2`` limit at each cell midpoint).

        Near zero-inertia points the bounds grow like ``1/A``; a midpoint
        state above the local limit then yields a wildly wrong slope.
        """
        self._mid_cap = [float(x) for x in u_cap]

    def beta_h(self, j: int, u: float) -> float:
        """``beta`` at half-grid index ``j`` (node ``j/2``) for ``u = sd^2``."""
        return min([p * u + q for p, q in self._beta_rows[j]], default=np.inf)

    def alpha_h(self, j: int, u: float) -> float:
        return max([p * u + q for p, q in self._alpha_rows[j]], default=-np.inf)

    def bounds(self, s: float, u: float):
        """``(alpha, beta)`` at an arbitrary path coordinate."""
        x = (s - self.s0) / self.ds
        k = min(max(int(x), 0), self.n - 1)
        f = x - k
        lo, hi = -math.inf, math.inf
        tol = self._tol
        upper, lower, mixed = self._cell_split[k]
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
        return lo, hi

    def cell_index(self, s: float):
        """Cell holding ``s`` and the fractional position inside it."""
        x = (s - self.s0) / self.ds
        k = min(max(int(x), 0), self.n - 1)
        return k, x - k

    def cell_rows(self, k: int):
        """Row coefficients ``(a0, da, b0, db, c0, dc)`` of cell ``k``."""
        return self._cell_rows[k]

    def cell_split(self, k: int):
        """Rows of cell ``k`` as ``(upper, lower, mixed)`` by the sign of ``a`` across the cell."""
        return self._cell_split[k]

    def _mid(self, cell: int, um: float) -> float:
        if um < 0.0:
            return 0.0
        if self._mid_cap is not None and um > self._mid_cap[cell]:
            return self._mid_cap[cell]
        return um

    def forward_step(self, k: int, u: float) -> float:
        """Midpoint step of ``du/ds = 2 beta`` from node ``k`` to ``k + 1``."""
        um = u + self.ds * self.beta_h(2 * k, u)
        return u + 2.0 * self.ds * self.beta_h(2 * k + 1, self._mid(k, um))

    def backward_step(self, k: int, u: float) -> float:
        """Midpoint step of ``du/ds = 2 alpha`` from node ``k`` back to ``k - 1``."""
        um = u - self.ds * self.alpha_h(2 * k, u)
        return u - 2.0 * self.ds * self.alpha_h(2 * k - 1, self._mid(k - 1, um))

    def step(self, s: float, u: float, h: float, accel) -> float:
        """Midpoint step of length ``h`` (negative for backward) with any field."""
        um = u + h * accel(s, u)
        return u + 2.0 * h * accel(s + 0.5 * h, um if um > 0.0 else 0.0)
