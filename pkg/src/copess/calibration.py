"""Bundled calibration: lattice laws, coil slopes and resistance coefficients."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .inductive_sensing import GapResponse, calibrate_gap_slopes
from .lattice_mechanics import LatticeCalibration, calibrate_from_anchors, default_anchors, read_anchor_csv
from .surface_dynamics import FrictionModel, calibrate_friction


@dataclass(frozen=True)
class SystemCalibration:
    lattice: LatticeCalibration
    gap: GapResponse
    friction: FrictionModel
    source: str = "built-in"


def default_motion_anchors() -> dict:
    text = (resources.files("copess") / "data" / "motion_anchors.json").read_text()
    return json.loads(text)


def load_calibration(anchor_csv=None, motion_json=None, v0: float | None = None) -> SystemCalibration:
    """Calibrate every model from anchor files, or from the built-in data when omitted."""
    anchors = read_anchor_csv(anchor_csv) if anchor_csv else default_anchors()
    lattice = calibrate_from_anchors(anchors)
    motion = json.loads(Path(motion_json).read_text()) if motion_json else default_motion_anchors()
    ratio = None if v0 is not None else motion.get("kinetic_ratio")
    friction = calibrate_friction(
        [tuple(p) for p in motion["initiation_tilt_deg"]],
        [tuple(p) for p in motion.get("stopping_distance_mm", [])],
        v0=v0,
        kinetic_ratio=ratio,
    )
    source = "built-in" if anchor_csv is None and motion_json is None else "file"
    return SystemCalibration(lattice, calibrate_gap_slopes(lattice), friction, source)
