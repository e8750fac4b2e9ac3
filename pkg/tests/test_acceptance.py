"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line printed at the end of the run.

Run on its own with ``python3 -m pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import functools
import sys
import time

import numpy as np
import pytest

from cruisetopp import PlanningFailure, TrajectoryPlanner
from cruisetopp.estimator import plan_once
from cruisetopp.limits import BoundaryIndex, mask_intervals, precompute_limits, reconstruct
from cruisetopp.model import ConstraintTable
from cruisetopp.planner import construct_profile
from cruisetopp.trajectory import constraint_violation, table_traces, traveling_time

from conftest import ACCEPTANCE, FIXTURES, STRAIGHT_2M, fitted, make_planner, sweep_grid
from toy import phase_plane_dp, toy_table


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@functools.lru_cache(maxsize=None)
def sweep(name):
    """10-point cruise-velocity sweep of one fixture: times, cruise shares and constraint excess."""
    est = make_planner(name)
    grid = sweep_grid(est)
    table = est.table_
    rows = []
    for eps in grid:
        traj = est.replan(eps)
        v_tab, a_tab = table_traces(traj, table)
        excess = max(constraint_violation(traj.v, traj.a, table.v_max, table.a_max),
                     constraint_violation(v_tab, a_tab, table.v_max, table.a_max))
        rows.append((traj.traveling_time, traj.cruise_proportion, excess))
    times, cruise, excess = map(np.array, zip(*rows))
    return grid, times, cruise, excess, table.ds / table.length


def test_criterion_1_acceleration_continuity():
    # precomputation is per problem and excluded from the planning time
    limits = {name: fitted(name).limits_ for name in FIXTURES}
    start = time.perf_counter()
    worst_before, worst_after = np.inf, 0.0
    parts = []
    for name, lim in limits.items():
        res = plan_once(lim, lim.max_mvc)
        amax = float(np.max(lim.table.a_max))
        sites = res.raw.intersections + res.raw.corners
        blended = {w.p1[0]: w.accel_jump for w in res.profile.windows}
        before = max(p.jump for p in sites) / amax
        # a site without a window keeps its jump
        after = max(blended.get(p.s, p.jump) for p in sites) / amax
        worst_before, worst_after = min(worst_before, before), max(worst_after, after)
        parts.append(f"{name} {before:.2f}->{after:.1e}")
    elapsed = time.perf_counter() - start
    ok = worst_before >= 0.5 and worst_after <= 1e-4 and elapsed < 1.0
    record(1, ok, f"jump/max(a_max) before>={worst_before:.2f}, after<={worst_after:.1e}, "
                  f"{elapsed:.2f} s; " + ", ".join(parts))


def test_criterion_2_closed_form_optimum():
    start = time.perf_counter()
    cases = {"trapezoid": 3.0, "triangle": 2.0 * np.sqrt(2.0)}
    errors = {}
    for name, exact in cases.items():
        est = make_planner(name, n_grid=1000)
        errors[name] = max(abs(traveling_time(est.raw_profile_) / exact - 1.0),
                           abs(est.trajectory_.traveling_time / exact - 1.0))
    elapsed = time.perf_counter() - start
    # fixed blend width so only the grid spacing changes between runs
    orders = {}
    for name in cases:
        t = [make_planner(name, n_grid=n, window=0.05).trajectory_.traveling_time for n in (250, 500, 1000)]
        orders[name] = float(np.log2(abs(t[0] - t[1]) / abs(t[1] - t[2])))
    ok = max(errors.values()) <= 1e-3 and min(orders.values()) >= 1.0 and elapsed < 1.0
    record(2, ok, ", ".join(f"{k} rel err {errors[k]:.1e} order {orders[k]:.2f}" for k in cases)
           + f"; {elapsed:.2f} s")


def test_criterion_3_time_non_increasing():
    worst, parts = -np.inf, []
    for name in FIXTURES:
        grid, times, *_ = sweep(name)
        rise = float(np.max(np.diff(times)))
        worst = max(worst, rise)
        parts.append(f"{name} {times[0]:.3f}->{times[-1]:.3f} s")
    record(3, worst <= 1e-6, f"largest rise {worst:.1e} s; " + ", ".join(parts))


def test_criterion_4_cruise_non_increasing():
    worst, parts, ok = -np.inf, [], True
    for name in FIXTURES:
        _, _, cruise, _, cell = sweep(name)
        rise = float(np.max(np.diff(cruise)))
        ok &= rise <= cell
        worst = max(worst, rise)
        parts.append(f"{name} {100 * cruise[0]:.0f}%->{100 * cruise[-1]:.0f}%")
    record(4, ok, f"largest rise {worst:.1e}; " + ", ".join(parts))


def _timing_medians(limits, grid, reps, rng, samples):
    # interleave repetitions in a shuffled order so slow phases of the machine hit every epsilon alike
    jobs = np.repeat(np.arange(len(grid)), reps)
    for i in rng.permutation(jobs):
        res = plan_once(limits, grid[i])
        samples[i].append(res.cni_time + res.bio_time)
    return np.array([1e3 * np.median(x) for x in samples])


def test_criterion_5_computation_time_trend():
    rng = np.random.default_rng(0)
    ok, parts = True, []
    for name in FIXTURES:
        est = fitted(name)
        grid = sweep_grid(est)
        samples = [[] for _ in grid]
        med = _timing_medians(est.limits_, grid, 20, rng, samples)
        # pool two more rounds before judging a dip, timings on a shared machine drift
        for _ in range(2):
            if np.all(med[1:] >= 0.8 * med[:-1]):
                break
            med = _timing_medians(est.limits_, grid, 20, rng, samples)
        ratio = float(np.min(med[1:] / med[:-1]))
        fast = med[0] < 5.0
        ok &= ratio >= 0.8 and fast
        parts.append(f"{name} {med[0]:.1f}->{med[-1]:.1f} ms (min step ratio {ratio:.2f})")
    record(5, ok, "; ".join(parts))


def _pinch_table(n=1000):
    # the velocity limit drops to 0.01 over a few cells at s = 0.1
    s = np.linspace(0.0, 1.0, n + 1)
    jq = 1.0 + 99.0 * np.exp(-((s - 0.1) / 0.01) ** 2)
    return ConstraintTable.from_halves(s, jq, np.zeros_like(s), 1.0, 1.0)


def _stall_table(n=1000):
    # inside the band the only admissible accelerations are <= -50 sd^2, so motion dies out
    s = np.linspace(0.0, 1.0, n + 1)
    band = (s > 0.4) & (s < 0.7)
    A = np.column_stack([np.ones_like(s), -np.ones_like(s)])
    B = np.column_stack([50.0 * band, np.zeros_like(s)])
    C = np.column_stack([-(~band).astype(float), -np.ones_like(s)])
    return ConstraintTable.from_rows(s, A, B, C, -np.ones_like(A))


def _adversarial_cases():
    unit = precompute_limits(TrajectoryPlanner(n_grid=1000).fit(STRAIGHT_2M).table_)
    pinch, stall = precompute_limits(_pinch_table()), precompute_limits(_stall_table())
    return [
        ("start above capped curve", lambda: plan_once(unit, 0.5, 0.8, 0.0), "boundary-above-MVC*"),
        ("end above capped curve", lambda: plan_once(unit, 0.5, 0.0, 0.8), "boundary-above-MVC*"),
        ("narrow pinch after a fast start", lambda: plan_once(pinch, 1.0, 1.0, 0.0), "no-connection"),
        ("zero-length path", lambda: TrajectoryPlanner().fit(np.ones((4, 1))), "degenerate-path"),
        ("cruise velocity at the interval bottom", lambda: plan_once(unit, 0.0), "no-connection"),
        ("stalled forward profile", lambda: plan_once(stall, stall.max_mvc), "forward-stall"),
    ]


def test_criterion_6_completeness():
    ok, parts = True, []
    for label, run, expected in _adversarial_cases():
        start = time.perf_counter()
        try:
            run()
            reason = "returned a trajectory"
        except PlanningFailure as exc:
            reason = exc.reason
        ms = 1e3 * (time.perf_counter() - start)
        good = reason == expected and ms < 100.0
        ok &= good
        parts.append(f"{label}: {reason} {ms:.1f} ms" + ("" if good else f" (want {expected})"))
    record(6, ok, "; ".join(parts))


def test_criterion_7_constraint_certificates():
    worst = max(float(np.max(sweep(name)[3])) for name in FIXTURES)
    count = sum(len(sweep(name)[0]) for name in FIXTURES)
    for name in FIXTURES:
        traj = fitted(name).trajectory_
        table = fitted(name).table_
        worst = max(worst, constraint_violation(traj.v, traj.a, table.v_max, table.a_max))
    record(7, worst <= 1e-6, f"largest excess over any bound {worst:.1e} over {count + len(FIXTURES)} trajectories")


def test_criterion_8_dynamic_programming_bound():
    start = time.perf_counter()
    ok, parts = True, []
    for seed in (0, 1, 2):
        limits = precompute_limits(toy_table(seed))
        curves = reconstruct(limits, limits.max_mvc)
        cni = traveling_time(construct_profile(curves, 0.0, 0.0))
        dp = phase_plane_dp(limits.table, curves.mvc_star)
        ok &= cni * 0.98 <= dp <= cni
        parts.append(f"seed {seed} dp {dp:.4f} vs cni {cni:.4f} ({100 * (dp / cni - 1):+.1f}%)")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    record(8, ok, "; ".join(parts) + f"; {elapsed:.2f} s")


def _random_boundary(rng, n=1001):
    s = np.linspace(0.0, 1.0, n)
    values = sum(rng.uniform(0.1, 1.0) * np.sin(2 * np.pi * rng.uniform(0.2, 6.0) * s + rng.uniform(0, 6.3))
                 for _ in range(rng.integers(1, 5))) + 2.0
    if rng.random() < 0.5:
        values = np.round(values, int(rng.integers(1, 3)))  # plateaus and ties
    if rng.random() < 0.5:
        a = int(rng.integers(0, n - 10))
        values[a:a + int(rng.integers(1, n - a))] = np.inf  # straight stretches
    return s, values


def test_criterion_9_partition_equivalence():
    rng = np.random.default_rng(9)
    mismatches = 0
    for _ in range(100):
        s, values = _random_boundary(rng)
        finite = values[np.isfinite(values)]
        eps = float(rng.choice(finite)) if rng.random() < 0.5 else float(rng.uniform(0.0, 4.0))
        under = BoundaryIndex(values).at_or_above(eps)
        scan = values >= eps
        with np.errstate(invalid="ignore"):
            spans = [(ka, kb) for _, _, ka, kb, inside in mask_intervals(s, under, values - eps) if inside]
        covered = np.zeros_like(scan)
        for ka, kb in spans:
            covered[ka:kb + 1] = True
        mismatches += int(not np.array_equal(under, scan) or not np.array_equal(covered, scan))
    record(9, mismatches == 0, f"{mismatches} mismatches over 100 random boundary/cruise-velocity pairs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
