"""Command line: ``cruisetopp {plan,sweep,curves,bench} --config FILE``.

Exit status: 0 success, 1 bad configuration or parameters, 2 planning failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, PlanConfig, load_config
from .estimator import plan_once
from .geometry import BezierPath, ZeroLengthPathError, build_arclength_map
from .limits import EpsilonRangeError, VelocityLimits, precompute_limits
from .model import ActuatorLimits, ModelError, build_constraint_table, make_model
from .planner import PlanningFailure
from .smoother import SmoothingError
from .trajectory import CRUISE_DEFINITION, actuator_traces

log = logging.getLogger("cruisetopp")

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2


def fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


def _jsonable(x):
    if isinstance(x, (float, np.floating)):
        return fmt(x) if not np.isfinite(x) else float(fmt(x))
    return x


@dataclass
class Problem:
    cfg: PlanConfig
    path: BezierPath
    amap: object
    limits: VelocityLimits
    precompute_time: float

    @property
    def model(self):
        return make_model(self.cfg.model)


def prepare(cfg: PlanConfig) -> Problem:
    """Arc-length map, constraint table and limit curves for one problem file."""
    t0 = time.perf_counter()
    path = BezierPath(cfg.control_points, orientation=cfg.orientation)
    amap = build_arclength_map(path, 8 * cfg.grid)
    limits = ActuatorLimits(cfg.v_max, cfg.a_max)
    table = build_constraint_table(make_model(cfg.model), limits, path, amap, cfg.grid)
    lims = precompute_limits(table)
    return Problem(cfg, path, amap, lims, time.perf_counter() - t0)


def _failure_doc(exc) -> dict:
    if isinstance(exc, PlanningFailure):
        return {"status": "failure", "reason": exc.reason, "s": exc.s, "detail": exc.detail}
    return {"status": "failure", "reason": "smoothing-failure", "s": exc.s, "detail": str(exc)}


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({k: _jsonable(v) for k, v in doc.items()}, fh, indent=2)
        fh.write("\n")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TOPP_THREADS", "1")))
    except ValueError:
        return 1


def cmd_plan(args, cfg: PlanConfig) -> int:
    out = Path(args.out)
    try:
        prob = prepare(cfg)
    except ZeroLengthPathError as exc:
        return _fail(out, PlanningFailure("degenerate-path", str(exc), 0.0))
    eps = cfg.epsilon if cfg.epsilon is not None else prob.limits.max_mvc
    try:
        res = plan_once(prob.limits, eps, cfg.start_velocity, cfg.end_velocity, cfg.window)
    except (PlanningFailure, SmoothingError) as exc:
        return _fail(out, exc)
    traj = res.trajectory
    traj.v, traj.a = actuator_traces(traj, prob.model, prob.path, prob.amap)
    m = traj.v.shape[1]
    header = ["t", "s", "s_dot", "s_ddot"] + [f"v_{i + 1}" for i in range(m)] + [f"a_{i + 1}" for i in range(m)]
    rows = ([fmt(x) for x in row] for row in np.column_stack([traj.t, traj.s, traj.sd, traj.sdd, traj.v, traj.a]))
    _write_csv(out / "trajectory.csv", header, rows)
    doc = traj.metrics()
    doc.update({"precompute_time_ms": 1e3 * prob.precompute_time, "cruise_definition": CRUISE_DEFINITION,
                "intersections": len(res.raw.intersections)})
    _write_json(out / "metrics.json", doc)
    print(f"traveling_time_s={fmt(traj.traveling_time)} cruise_proportion={fmt(traj.cruise_proportion)} "
          f"comp_time_ms={fmt(1e3 * traj.computation_time)}")
    return EXIT_OK


def _fail(out: Path, exc) -> int:
    doc = _failure_doc(exc)
    print(json.dumps({k: _jsonable(v) for k, v in doc.items()}))
    _write_json(out / "failure.json", doc)
    return EXIT_FAILURE


def _epsilon_grid(cfg: PlanConfig, limits: VelocityLimits, default_steps: int = 10):
    lo, hi = limits.epsilon_range(cfg.start_velocity, cfg.end_velocity)
    if cfg.sweep is None:
        a, b, n = lo, hi, default_steps
    else:
        a, b, n = cfg.sweep
        if a < lo or b > hi:
            log.warning("sweep [%s, %s] clipped to the valid interval [%s, %s]", fmt(a), fmt(b), fmt(lo), fmt(hi))
            a, b = min(max(a, lo), hi), min(max(b, lo), hi)
    if lo == 0.0 and a == 0.0:
        a = min(b, 1e-3 * hi)  # a zero cruise velocity can never finish the path
    return np.linspace(a, b, n), lo, hi


def monotonicity_report(eps, times, cruise, comp, ds, length) -> dict:
    """Pass/fail of the three trend checks over the successful rows."""
    ok = ~np.isnan(times)
    t, c, k = times[ok], cruise[ok], comp[ok]
    cell = ds / length
    return {
        "rows": int(len(eps)),
        "planned": int(ok.sum()),
        "traveling_time_non_increasing": bool(np.all(np.diff(t) <= 1e-6)),
        "cruise_proportion_non_increasing": bool(np.all(np.diff(c) <= cell + 1e-12)),
        "comp_time_non_decreasing_20pct": bool(np.all(k[1:] >= 0.8 * k[:-1])),
    }


def cmd_sweep(args, cfg: PlanConfig) -> int:
    out = Path(args.out)
    try:
        prob = prepare(cfg)
    except ZeroLengthPathError as exc:
        return _fail(out, PlanningFailure("degenerate-path", str(exc), 0.0))
    grid, _, _ = _epsilon_grid(cfg, prob.limits)

    def row(eps):
        try:
            res = plan_once(prob.limits, float(eps), cfg.start_velocity, cfg.end_velocity, cfg.window)
        except PlanningFailure as exc:
            return eps, math.nan, math.nan, math.nan, exc.reason
        except SmoothingError:
            return eps, math.nan, math.nan, math.nan, "smoothing-failure"
        tr = res.trajectory
        return eps, tr.traveling_time, 1e3 * tr.computation_time, tr.cruise_proportion, "ok"

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(row, grid))
    _write_csv(out / "sweep.csv", ["epsilon", "traveling_time", "comp_time_ms", "cruise_proportion", "status"],
               [[fmt(e), fmt(t), fmt(c), fmt(p), st] for e, t, c, p, st in results])
    arr = np.array([r[:4] for r in results], dtype=float)
    table = prob.limits.table
    report = monotonicity_report(arr[:, 0], arr[:, 1], arr[:, 3], arr[:, 2], table.ds, table.length)
    _write_json(out / "sweep_report.json", report)
    for key, val in report.items():
        print(f"{key}: {val}")
    return EXIT_OK


def cmd_curves(args, cfg: PlanConfig) -> int:
    out = Path(args.out)
    try:
        prob = prepare(cfg)
    except ZeroLengthPathError as exc:
        return _fail(out, PlanningFailure("degenerate-path", str(exc), 0.0))
    lim = prob.limits
    eps = cfg.epsilon if cfg.epsilon is not None else lim.max_mvc
    star = np.minimum(lim.mvc, eps)
    rows = ([fmt(x) for x in r] for r in np.column_stack([lim.s, lim.mvc_v, lim.mvc_a, lim.mvc, lim.cvb, star]))
    _write_csv(out / "curves.csv", ["s", "mvc_v", "mvc_a", "mvc", "cvb", "mvc_star"], rows)
    print(f"max_mvc={fmt(lim.max_mvc)} epsilon={fmt(eps)}")
    return EXIT_OK


def cmd_bench(args, cfg: PlanConfig) -> int:
    out = Path(args.out)
    try:
        prob = prepare(cfg)
    except ZeroLengthPathError as exc:
        return _fail(out, PlanningFailure("degenerate-path", str(exc), 0.0))
    grid, lo, hi = _epsilon_grid(cfg, prob.limits, default_steps=5)
    reps = max(20, args.reps)
    jobs = [(i, r) for i in range(len(grid)) for r in range(reps)]
    random.Random(args.seed).shuffle(jobs)
    times = {i: {"pre": [], "cni": [], "bio": [], "n": 0, "status": "ok"} for i in range(len(grid))}
    for i, _ in jobs:
        t0 = time.perf_counter()
        p = prepare(cfg)
        times[i]["pre"].append(time.perf_counter() - t0)
        try:
            res = plan_once(p.limits, float(grid[i]), cfg.start_velocity, cfg.end_velocity, cfg.window)
        except PlanningFailure as exc:
            times[i]["status"] = exc.reason
            continue
        except SmoothingError:
            times[i]["status"] = "smoothing-failure"
            continue
        times[i]["cni"].append(res.cni_time)
        times[i]["bio"].append(res.bio_time)
        times[i]["n"] = len(res.raw.intersections) + len(res.raw.corners)

    def stats(v):
        if not v:
            return math.nan, math.nan
        v = 1e3 * np.asarray(v)
        return float(np.median(v)), float(np.percentile(v, 95))

    header = ["epsilon", "normalized_epsilon", "precompute_median_ms", "precompute_p95_ms", "cni_median_ms",
              "cni_p95_ms", "bio_median_ms", "bio_p95_ms", "blend_sites", "status"]
    rows = []
    span = hi - lo
    for i, eps in enumerate(grid):
        d = times[i]
        norm = (eps - lo) / span if span > 0 else 0.0
        rows.append([fmt(eps), fmt(norm), *map(fmt, stats(d["pre"])), *map(fmt, stats(d["cni"])),
                     *map(fmt, stats(d["bio"])), str(d["n"]), d["status"]])
    _write_csv(out / "bench.csv", header, rows)
    print(" ".join(f"{h:>12}" for h in header[:9]))
    for r in rows:
        print(" ".join(f"{x:>12}" for x in r[:9]))
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "sweep": cmd_sweep, "curves": cmd_curves, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cruisetopp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="problem file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--grid", type=int, help="grid intervals along the path (overrides the file)")
        p.add_argument("--epsilon", type=float, help="cruise velocity (overrides the file)")
        p.add_argument("--seed", type=int, default=0, help="seed for run ordering")
        if name == "bench":
            p.add_argument("--reps", type=int, default=20, help="repetitions per epsilon (at least 20)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.grid is not None:
            if args.grid < 16:
                raise ConfigError("grid size must be at least 16", key="--grid")
            cfg.grid = args.grid
        if args.epsilon is not None:
            if not (args.epsilon > 0 and math.isfinite(args.epsilon)):
                raise ConfigError("epsilon must be a positive number", key="--epsilon")
            cfg.epsilon = args.epsilon
        Path(args.out).mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ModelError, EpsilonRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
