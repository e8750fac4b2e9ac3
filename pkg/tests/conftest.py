import functools

import numpy as np
import pytest

from cruisetopp import TrajectoryPlanner

STRAIGHT_2M = np.array([[0.0], [2.0 / 3.0], [4.0 / 3.0], [2.0]])

# five fixture problems shared by the acceptance and trend tests
FIXTURES = {
    "trapezoid": dict(X=STRAIGHT_2M, model="unit", v_max=1.0, a_max=1.0),
    "triangle": dict(X=STRAIGHT_2M, model="unit", v_max=10.0, a_max=1.0),
    "curve_a": dict(X=np.array([[0, 0], [1, 2], [3, -1], [4, 1.0]]), model="diffcaster",
                    v_max=[1.0, 1.0], a_max=[2.0, 2.0], orientation=True),
    "curve_b": dict(X=np.array([[0, 0], [1, 0], [1, 1], [2, 1.0]]), model="diffcaster",
                    v_max=[0.8, 0.8], a_max=[1.0, 1.0], orientation=True),
    "curve_c": dict(X=np.array([[0, 0], [2, 3], [-1, 3], [1, 0.0]]), model="diffcaster",
                    v_max=[1.5, 1.0], a_max=[1.0, 2.0], orientation=True),
}


def make_planner(name, **overrides):
    params = dict(FIXTURES[name])
    X = params.pop("X")
    params.update(overrides)
    return TrajectoryPlanner(**params).fit(X)


@functools.lru_cache(maxsize=None)
def fitted(name):
    """Fitted planner per fixture, shared across tests (do not mutate its parameters)."""
    return make_planner(name)


def sweep_grid(planner, steps=10):
    """Cruise velocities from just above the bottom of the admissible interval to its top."""
    lo, hi = planner.epsilon_range_
    return np.linspace(max(lo, 0.05 * hi), hi, steps)


@pytest.fixture(params=sorted(FIXTURES))
def fixture_name(request):
    return request.param


# criterion verdicts collected by the acceptance tests, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
