import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cruisetopp.cli import main
from cruisetopp.config import ConfigError, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TRAPEZOID = """\
# straight 2 m move
control_points = [[0.0], [0.6666666666666666], [1.3333333333333333], [2.0]]
model = unit
v_max = [1.0]
a_max = [1.0]
epsilon = 1.0
grid = 400
"""


def write(tmp_path, text, name="problem.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_minimal_config():
    cfg = parse_config(TRAPEZOID)
    assert cfg.control_points.shape == (4, 1)
    assert cfg.model == "unit" and cfg.grid == 400 and cfg.epsilon == 1.0


@pytest.mark.parametrize("text, key", [
    ("control_points = [[0],[1],[2],[3]]\nv_max = [1]\n", "a_max"),
    ("control_points = [[0],[1],[2],[3]]\nv_max = [1]\na_max = [-1]\n", "a_max"),
    ("control_points = [[0],[1],[2]]\nv_max = [1]\na_max = [1]\n", "control_points"),
    ("control_points = [[0],[1],[2],[3]]\nv_max = [1]\na_max = [1]\nmodel = tricycle\n", "model"),
    ("control_points = [[0],[1],[2],[3]]\nv_max = [1]\na_max = [1]\nspeed = 3\n", "speed"),
])
def test_config_errors_name_the_field(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key
    assert key in str(info.value)


def test_config_error_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("control_points = [[0],[1],[2],[3]]\nthis line is wrong\n")
    assert info.value.line == 2


def test_plan_trapezoid(tmp_path):
    assert main(["plan", "--config", write(tmp_path, TRAPEZOID), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert float(rows[-1]["t"]) == pytest.approx(3.0, abs=1e-3)
    assert list(rows[0]) == ["t", "s", "s_dot", "s_ddot", "v_1", "a_1"]
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["traveling_time_s"] == pytest.approx(3.0, abs=1e-3)


def test_start_above_cruise_velocity_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, TRAPEZOID.replace("epsilon = 1.0", "epsilon = 0.5\nstart_velocity = 0.8"))
    assert main(["plan", "--config", cfg, "--out", str(tmp_path)]) == 2
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["reason"] == "boundary-above-MVC*"
    assert json.loads((tmp_path / "failure.json").read_text())["reason"] == "boundary-above-MVC*"


def test_zero_length_path_exits_2(tmp_path):
    cfg = write(tmp_path, TRAPEZOID.replace("[[0.0], [0.6666666666666666], [1.3333333333333333], [2.0]]",
                                            "[[1.0], [1.0], [1.0], [1.0]]"))
    assert main(["plan", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert json.loads((tmp_path / "failure.json").read_text())["reason"] == "degenerate-path"


def test_missing_field_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, "\n".join(l for l in TRAPEZOID.splitlines() if not l.startswith("a_max")))
    assert main(["plan", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "a_max" in capsys.readouterr().err


def test_epsilon_out_of_range_exits_1(tmp_path, capsys):
    assert main(["plan", "--config", write(tmp_path, TRAPEZOID), "--out", str(tmp_path), "--epsilon", "3"]) == 1
    assert "valid interval" in capsys.readouterr().err


def test_unreadable_config_exits_1(tmp_path):
    assert main(["plan", "--config", str(tmp_path / "missing.cfg"), "--out", str(tmp_path)]) == 1


def test_sweep_rows_and_report(tmp_path):
    cfg = write(tmp_path, TRAPEZOID + "sweep = [0.2, 1.0, 10]\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 10 and all(r["status"] == "ok" for r in rows)
    times = [float(r["traveling_time"]) for r in rows]
    assert np.all(np.diff(times) <= 1e-6)
    report = json.loads((tmp_path / "sweep_report.json").read_text())
    assert report["traveling_time_non_increasing"] and report["cruise_proportion_non_increasing"]


def test_sweep_is_identical_across_thread_counts(tmp_path, monkeypatch):
    cfg = write(tmp_path, TRAPEZOID + "sweep = [0.2, 1.0, 6]\n")
    columns = ("epsilon", "traveling_time", "cruise_proportion", "status")
    outputs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("TOPP_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        outputs.append([[r[c] for c in columns] for r in read_csv(out / "sweep.csv")])
    assert outputs[0] == outputs[1]


def test_curves_for_unit_model(tmp_path):
    cfg = write(tmp_path, TRAPEZOID)
    assert main(["curves", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "curves.csv")
    assert all(float(r["mvc_v"]) == 1.0 for r in rows)
    assert all(r["cvb"] == "inf" for r in rows)
    assert all(float(r["mvc"]) == min(float(r["mvc_a"]), float(r["mvc_v"])) for r in rows)


def test_plan_output_is_deterministic(tmp_path):
    cfg = write(tmp_path, open(CONFIGS / "diffcaster.cfg").read() + "grid = 300\n")
    for run in ("a", "b"):
        assert main(["plan", "--config", cfg, "--out", str(tmp_path / run), "--seed", "3"]) == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_bench_report(tmp_path):
    cfg = write(tmp_path, TRAPEZOID.replace("grid = 400", "grid = 100") + "sweep = [0.2, 1.0, 3]\n")
    assert main(["bench", "--config", cfg, "--out", str(tmp_path), "--reps", "20", "--seed", "1"]) == 0
    rows = read_csv(tmp_path / "bench.csv")
    assert [float(r["normalized_epsilon"]) for r in rows] == pytest.approx([0.2, 0.6, 1.0])
    assert all(r["status"] == "ok" and not math.isnan(float(r["cni_median_ms"])) for r in rows)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cruisetopp.cli", "plan", "--config", write(tmp_path, TRAPEZOID),
                           "--out", str(tmp_path)], capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "traveling_time_s=" in proc.stdout


def test_shipped_configs_plan(tmp_path):
    for name in ("trapezoid.cfg", "diffcaster.cfg"):
        assert main(["plan", "--config", str(CONFIGS / name), "--out", str(tmp_path / name), "--grid", "300"]) == 0
