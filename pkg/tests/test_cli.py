import csv
import json

import pytest

from copess import cli
from copess.cli import main

MAP = [[0.2, 0.2, 0.07, 0.07]] * 4


@pytest.fixture
def scenario(tmp_path):
    doc = {
        "map": MAP,
        "object": {"mass_kg": 0.1},
        "tilt_schedule": [[0, 0], [1, 6]],
        "sim": {"duration_s": 4.0},
        "goal": {"kind": "stop_in_cell", "cell": [1, 3]},
    }
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(doc))
    return p


def test_cycle_then_metrics(tmp_path, capsys):
    out = tmp_path / "cyc"
    assert main(["simulate", "--cycle", "0.10", "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["metrics", "--frames", str(out / "frames.csv"), "--force", str(out / "force.csv")]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["sensitivity_uh_per_n"] == pytest.approx(18.92, rel=0.01)


def test_simulate_is_byte_identical(tmp_path, scenario):
    for name in ("a", "b"):
        assert main(["simulate", str(scenario), "--out", str(tmp_path / name)]) == 0
    for f in ("trajectory.csv", "frames.csv", "scenario.json", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and len(manifest["scenario_digest"]) == 64


def test_out_dir_from_environment(tmp_path, scenario, monkeypatch):
    monkeypatch.setenv("COPESS_OUT", str(tmp_path / "env"))
    assert main(["simulate", str(scenario)]) == 0
    assert (tmp_path / "env" / "trajectory.csv").exists()


def test_sweep_distance_increases_with_density(tmp_path):
    assert main(["sweep", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    travel = [float(r["travel_mm"]) for r in rows]
    assert [float(r["density"]) for r in rows] == [0.07, 0.10, 0.20]
    assert travel[0] < travel[1] < travel[2]


def test_localize_writes_track(tmp_path, scenario):
    main(["simulate", str(scenario), "--out", str(tmp_path)])
    assert main(["localize", "--frames", str(tmp_path / "frames.csv"), "--out", str(tmp_path / "loc")]) == 0
    assert (tmp_path / "loc" / "track.csv").read_text().startswith("t_s,x_mm,y_mm,confidence_uh")


def test_optimize_outputs(tmp_path, scenario):
    assert main(["optimize", str(scenario), "--space", "split", "--out", str(tmp_path)]) == 0
    best = json.loads((tmp_path / "best_map.json").read_text())
    assert best["exhaustive"] and len(best["map"]) == 4
    trace = (tmp_path / "cost_trace.csv").read_text().splitlines()
    assert trace[0] == "eval_idx,cost" and len(trace) == 22


def test_calibrate_writes_laws(tmp_path, capsys):
    assert main(["calibrate", "--out", str(tmp_path)]) == 0
    laws = json.loads((tmp_path / "laws.json").read_text())
    assert laws["friction"]["v0_mm_s"] == pytest.approx(584.79, abs=0.01)
    assert set(json.loads(capsys.readouterr().out)) == {"k0", "f_op", "sensitivity", "hysteresis_pct"}


def test_unknown_command():
    assert main(["teleport"]) == 64


def test_invalid_scenario_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"map": [[0.05] * 4] * 4}))
    assert main(["simulate", str(p), "--out", str(tmp_path)]) == 1
    assert "7 %" in capsys.readouterr().err


def test_malformed_json_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert main(["simulate", str(p)]) == 1
    assert "line 1" in capsys.readouterr().err


def test_missing_file_and_bad_flags(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json")]) == 1
    assert main(["sweep", "--densities", "a,b", "--out", str(tmp_path)]) == 1
    assert main(["metrics"]) == 1


def test_unprintable_cycle_density(tmp_path, capsys):
    assert main(["simulate", "--cycle", "0.05", "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.count("7 %") == 1


def test_metrics_on_non_cycle_logs(tmp_path, scenario):
    main(["simulate", str(scenario), "--out", str(tmp_path)])
    force = tmp_path / "force.csv"
    force.write_text("t_s,force_n,disp_mm\n0.0,0.0,0.0\n0.05,0.1,0.2\n")
    assert main(["metrics", "--frames", str(tmp_path / "frames.csv"), "--force", str(force)]) == 1


def test_runtime_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver diverged")

    monkeypatch.setattr(cli, "simulate_indentation_cycle", boom)
    assert main(["simulate", "--cycle", "0.10", "--out", str(tmp_path)]) == 2


def test_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["-h"])
    assert exc.value.code == 0
    assert "simulate" in capsys.readouterr().out
