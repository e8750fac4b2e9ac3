"""Seeded two-actuator constraint tables and a phase-plane dynamic program used as oracles."""

import numpy as np

from cruisetopp.model import ConstraintTable


def toy_table(seed, n=1000):
    """Smooth random two-actuator table on a path of length 1 to 2, free of zero-inertia points."""
    rng = np.random.default_rng(seed)
    length = rng.uniform(1.0, 2.0)
    s = np.linspace(0.0, length, n + 1)
    jq = np.column_stack([
        a + b * np.cos(2 * np.pi * f * s / length + p)
        for a, b, f, p in zip(rng.uniform(0.8, 1.2, 2), rng.uniform(0.1, 0.5, 2), rng.uniform(0.5, 2, 2),
                              rng.uniform(0, 2 * np.pi, 2))
    ])
    jb = np.column_stack([
        b * np.sin(2 * np.pi * f * s / length + p)
        for b, f, p in zip(rng.uniform(0.2, 1.5, 2), rng.uniform(0.5, 2, 2), rng.uniform(0, 2 * np.pi, 2))
    ])
    return ConstraintTable.from_halves(s, jq, jb, rng.uniform(0.5, 2.0, 2), rng.uniform(0.5, 2.0, 2))


def phase_plane_dp(table, cap, stations=64, levels=64, sd_start=0.0, sd_end=0.0):
    """Shortest traveling time over a ``stations x levels`` phase-plane lattice.

    Levels at each station split ``[0, cap(s)]`` evenly. A move between
    neighbouring stations runs at constant path acceleration and is allowed
    when that acceleration lies inside ``[alpha, beta]`` at both ends and
    both ends are at or below the cap. Its cost is ``2 ds / (sd_a + sd_b)``.
    """
    sk = np.linspace(table.s[0], table.s[-1], stations)
    ds = sk[1] - sk[0]
    top = np.interp(sk, table.s, cap)
    sd = np.linspace(0.0, 1.0, levels)[None, :] * top[:, None]
    u = sd ** 2
    lo = np.empty_like(u)
    hi = np.empty_like(u)
    for k in range(stations):
        A, B, C = table.rows_at(sk[k])
        upper, lower = A > table.tol_zi, A < -table.tol_zi
        num = -np.outer(u[k], B) - C
        lo[k] = (num[:, lower] / A[lower]).max(axis=1)
        hi[k] = (num[:, upper] / A[upper]).min(axis=1)
    start = int(np.argmin(np.abs(sd[0] - sd_start)))
    end = int(np.argmin(np.abs(sd[-1] - sd_end)))
    cost = np.full(levels, np.inf)
    cost[start] = 0.0
    slack = 1e-12
    for k in range(stations - 1):
        acc = (u[k + 1][None, :] - u[k][:, None]) / (2 * ds)
        ok = ((acc >= lo[k][:, None] - slack) & (acc <= hi[k][:, None] + slack)
              & (acc >= lo[k + 1][None, :] - slack) & (acc <= hi[k + 1][None, :] + slack))
        total = sd[k][:, None] + sd[k + 1][None, :]
        with np.errstate(divide="ignore"):
            dt = np.where(total > 0, 2 * ds / total, np.inf)
        cost = np.where(ok, cost[:, None] + dt, np.inf).min(axis=0)
    return float(cost[end])
