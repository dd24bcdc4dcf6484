import json

import pytest

from copess.scenario_io import (
    DEFAULTS,
    RunManifest,
    ScenarioParseError,
    ScenarioValidationError,
    build_scenario,
    load_scenario,
    scenario_document,
    write_manifest,
)
from copess.surface_dynamics import TiltSchedule

MAP = [[0.2, 0.2, 0.07, 0.07]] * 4


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


def test_minimal_file_gets_defaults(tmp_path):
    loaded = load_scenario(write(tmp_path, {"map": MAP}))
    sc = loaded.scenario
    assert sc.obj.mass == 0.5 and sc.obj.footprint_radius == 0.0
    assert sc.schedule == TiltSchedule.ramp()
    assert sc.frame_hz == 20.0 and sc.dt == 1e-3
    assert loaded.goal is None
    assert loaded.document["sim"] == DEFAULTS["sim"]


def test_partial_section_merged():
    loaded = build_scenario({"map": MAP, "object": {"mass_kg": 0.1, "footprint": {"disc_radius_mm": 12}}})
    assert loaded.scenario.obj.mass == 0.1 and loaded.scenario.obj.footprint_radius == 12
    assert loaded.scenario.obj.kind == "rigid"


def test_bad_shape():
    with pytest.raises(ScenarioValidationError) as exc:
        build_scenario({"map": [[0.1] * 4] * 3})
    assert any("4x4" in v for v in exc.value.violations)


def test_low_density_cites_floor():
    grid = [row[:] for row in MAP]
    grid[2][1] = 0.05
    with pytest.raises(ScenarioValidationError) as exc:
        build_scenario({"map": grid})
    assert exc.value.violations == ["map cell (2,1): relative density 0.05 below the 7 % floor: "
                                    "the lattice cannot support itself"]


def test_every_problem_collected():
    doc = {
        "map": [[0.05] + [0.1] * 3] + [[0.1] * 4] * 3,
        "object": {"mass_kg": "heavy"},
        "sim": {"frame_hz": 30.0},
        "seed": 1.5,
        "cell_size_mm": 5.0,
        "goal": {"kind": "hover"},
    }
    with pytest.raises(ScenarioValidationError) as exc:
        build_scenario(doc)
    text = "\n".join(exc.value.violations)
    for needle in ("map cell (0,0)", "mass_kg", "30 Hz", "seed", "cell_size_mm", "goal"):
        assert needle in text


def test_unknown_key_rejected():
    with pytest.raises(ScenarioValidationError):
        build_scenario({"map": MAP, "colour": "red"})


def test_parse_error_has_position(tmp_path):
    with pytest.raises(ScenarioParseError, match="line 2, column"):
        load_scenario(write(tmp_path, '{"map":\n  [1, }'))


def test_goal_parsed():
    loaded = build_scenario({"map": MAP, "goal": {"kind": "stop_in_cell", "cell": [1, 3]}})
    assert loaded.goal.cell == (1, 3)


def test_document_round_trip():
    loaded = build_scenario({"map": MAP, "goal": {"kind": "corridor", "cells": [[1, 0], [1, 1]]},
                             "tilt_schedule": [[0, 0], [2, 8]]})
    again = build_scenario(scenario_document(loaded.scenario, loaded.goal))
    assert again.scenario == loaded.scenario and again.goal == loaded.goal


def test_digest_ignores_key_order(tmp_path):
    a = build_scenario({"map": MAP, "seed": 3})
    b = load_scenario(write(tmp_path, '{"seed": 3, "map": ' + json.dumps(MAP) + "}"))
    assert a.digest == b.digest and len(a.digest) == 64
    assert build_scenario({"map": MAP, "seed": 4}).digest != a.digest


def test_manifest(tmp_path):
    path = write_manifest(tmp_path, RunManifest("simulate", "abc", "built-in", 7, ("trajectory.csv",)))
    data = json.loads(path.read_text())
    assert data["seed"] == 7 and data["outputs"] == ["trajectory.csv"] and "tool_version" in data
