"""Scenario files, run manifests and log persistence."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import __version__
from .guidance_optimizer import GuidanceGoal
from .lattice_mechanics import CELL_SIZE_MAX, CELL_SIZE_MIN, REFERENCE_CELL_SIZE, density_violations
from .surface_dynamics import DEFAULT_DT, ObjectSpec, ObjectState, Scenario, TiltSchedule, integration_violations
from .tile import COLS, ROWS, StiffnessMap

MANIFEST_NAME = "manifest.json"

DEFAULTS: dict[str, Any] = {
    "object": {"mass_kg": 0.5, "footprint": "point", "kind": "rigid"},
    "tilt_schedule": {"axis": "x", "knots": [[0.0, 0.0], [100.0, 20.0], [300.0, -20.0], [400.0, 0.0]]},
    "initial": {"x_mm": 18.75, "y_mm": 56.25, "vx_mm_s": 0.0, "vy_mm_s": 0.0},
    "sim": {"dt_s": DEFAULT_DT, "duration_s": 400.0, "frame_hz": 20.0},
    "seed": 0,
    "cell_size_mm": REFERENCE_CELL_SIZE,
}


class ScenarioParseError(ValueError):
    pass


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid scenario:\n  - " + "\n  - ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class LoadedScenario:
    scenario: Scenario
    goal: GuidanceGoal | None
    document: dict  # normalised content with every default filled in
    digest: str = field(default="")


def scenario_digest(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _merge(section: str, given: Any) -> Any:
    default = DEFAULTS[section]
    if isinstance(default, dict) and isinstance(given, dict):
        return {**default, **given}
    return given


def _number(doc: dict, section: str, key: str, problems: list[str]) -> float:
    value = doc[section].get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{section}.{key}: expected a number, got {value!r}")
        return float("nan")
    return float(value)


def _footprint_radius(spec: Any, problems: list[str]) -> float:
    if spec == "point":
        return 0.0
    if isinstance(spec, dict) and set(spec) == {"disc_radius_mm"}:
        r = spec["disc_radius_mm"]
        if isinstance(r, (int, float)) and r > 0:
            return float(r)
    problems.append(f"object.footprint: expected 'point' or {{'disc_radius_mm': r > 0}}, got {spec!r}")
    return 0.0


def _normalise(raw: dict) -> dict:
    unknown = set(raw) - set(DEFAULTS) - {"map", "goal"}
    if unknown:
        raise ScenarioValidationError([f"unknown top-level key {k!r}" for k in sorted(unknown)])
    doc = {k: _merge(k, raw.get(k, DEFAULTS[k])) for k in DEFAULTS}
    if isinstance(doc["tilt_schedule"], list):
        doc["tilt_schedule"] = {"axis": "x", "knots": doc["tilt_schedule"]}
    doc["map"] = raw.get("map")
    if "goal" in raw:
        doc["goal"] = raw["goal"]
    return doc


def build_scenario(raw: dict) -> LoadedScenario:
    """Validate a scenario document, collecting every violation before raising."""
    if not isinstance(raw, dict):
        raise ScenarioValidationError(["scenario must be a JSON object"])
    doc = _normalise(raw)
    problems: list[str] = []

    grid = doc["map"]
    smap = None
    if grid is None:
        problems.append("map: required 4x4 array of relative densities")
    elif not (isinstance(grid, list) and all(isinstance(r, list) for r in grid)):
        problems.append(f"map: expected a {ROWS}x{COLS} array")
    else:
        if not (len(grid) == ROWS and all(len(r) == COLS for r in grid)):
            problems.append(f"map: expected a {ROWS}x{COLS} array, got row lengths {[len(r) for r in grid]}")
        for i, row in enumerate(grid):
            for j, v in enumerate(row):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    problems.append(f"map cell ({i},{j}): expected a number, got {v!r}")
                else:
                    problems.extend(f"map cell ({i},{j}): {msg}" for msg in density_violations(v))
        if not problems:
            smap = StiffnessMap.from_array(grid)

    cell_size = doc["cell_size_mm"]
    if isinstance(cell_size, bool) or not isinstance(cell_size, (int, float)):
        problems.append(f"cell_size_mm: expected a number, got {cell_size!r}")
    elif not CELL_SIZE_MIN <= cell_size <= CELL_SIZE_MAX:
        problems.append(f"cell_size_mm: {cell_size} outside the printable range [2.2, 4.0] mm")

    o = doc["object"]
    mass = _number(doc, "object", "mass_kg", problems)
    radius = _footprint_radius(o.get("footprint"), problems)
    obj = None
    try:
        obj = ObjectSpec(mass, radius, o.get("kind", "rigid"))
    except ValueError as exc:
        problems.append(f"object: {exc}")

    ts = doc["tilt_schedule"]
    schedule = None
    knots = ts.get("knots")
    if not (isinstance(knots, list) and all(isinstance(k, list) and len(k) == 2 for k in knots)):
        problems.append("tilt_schedule.knots: expected a list of [t_s, angle_deg] pairs")
    else:
        try:
            schedule = TiltSchedule(tuple(tuple(k) for k in knots), ts.get("axis", "x"))
        except (TypeError, ValueError) as exc:
            problems.extend(f"tilt_schedule: {msg}" for msg in str(exc).split("; "))

    x, y = _number(doc, "initial", "x_mm", problems), _number(doc, "initial", "y_mm", problems)
    vx, vy = _number(doc, "initial", "vx_mm_s", problems), _number(doc, "initial", "vy_mm_s", problems)
    dt = _number(doc, "sim", "dt_s", problems)
    duration = _number(doc, "sim", "duration_s", problems)
    frame_hz = _number(doc, "sim", "frame_hz", problems)
    seed = doc["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append(f"seed: expected an integer, got {seed!r}")

    goal = None
    if "goal" in doc:
        g = doc["goal"]
        try:
            goal = GuidanceGoal(**g) if isinstance(g, dict) else None
            if goal is None:
                problems.append("goal: expected an object")
        except (TypeError, ValueError) as exc:
            problems.append(f"goal: {exc}")

    initial = ObjectState(x, y, vx, vy)
    problems.extend(f"sim: {msg}" for msg in integration_violations(dt, duration, frame_hz, initial))
    if problems:
        raise ScenarioValidationError(problems)
    smap = StiffnessMap(smap.densities, float(cell_size))
    scenario = Scenario(smap, obj, schedule, initial, dt, duration, frame_hz, seed)
    return LoadedScenario(scenario, goal, doc, scenario_digest(doc))


def load_scenario(path) -> LoadedScenario:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return build_scenario(raw)


def scenario_document(scenario: Scenario, goal: GuidanceGoal | None = None) -> dict:
    """Inverse of :func:`build_scenario`."""
    obj = scenario.obj
    doc = {
        "object": {
            "mass_kg": obj.mass,
            "footprint": "point" if obj.footprint_radius == 0 else {"disc_radius_mm": obj.footprint_radius},
            "kind": obj.kind,
        },
        "map": [list(r) for r in scenario.smap.densities],
        "cell_size_mm": scenario.smap.cell_size,
        "tilt_schedule": {"axis": scenario.schedule.axis, "knots": [list(k) for k in scenario.schedule.knots]},
        "initial": {
            "x_mm": scenario.initial.x, "y_mm": scenario.initial.y,
            "vx_mm_s": scenario.initial.vx, "vy_mm_s": scenario.initial.vy,
        },
        "sim": {"dt_s": scenario.dt, "duration_s": scenario.duration, "frame_hz": scenario.frame_hz},
        "seed": scenario.seed,
    }
    if goal is not None:
        doc["goal"] = {
            "kind": goal.kind, "cell": list(goal.cell) if goal.cell else None, "limit": goal.limit,
            "cells": [list(c) for c in goal.cells], "weight": goal.weight, "effort_weight": goal.effort_weight,
        }
    return doc


@dataclass(frozen=True)
class RunManifest:
    command: str
    scenario_digest: str | None
    calibration_source: str
    seed: int
    outputs: tuple[str, ...]
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "scenario_digest": self.scenario_digest,
            "calibration_source": self.calibration_source,
            "seed": self.seed,
            "outputs": list(self.outputs),
        }


def write_manifest(out_dir, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
