"""Empirical coil response and synthetic 16-channel frames.

Each coil sees its target plate move closer as the lattice pad above it
compresses. Within the coil's linear span the inductance change is
proportional to compression, with a per-density slope chosen so that the
mean slope of the inductance-force curve over the operational range matches
the measured sensitivity.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lattice_mechanics import (
    DENSIFICATION_MM,
    DensificationError,
    LatticeCalibration,
    PiecewisePowerLaw,
    compression_for_force,
    loading_force,
    unloading_force,
)
from .tile import CoilArraySpec, StiffnessMap

LINEAR_SPAN_MM = 12.0
FRAME_RATE_HZ = 20.0


class ExtrapolationWarning(UserWarning):
    pass


class SaturationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GapResponse:
    """Inductance change per mm of compression, by relative density."""

    slopes: PiecewisePowerLaw
    linear_span: float = LINEAR_SPAN_MM

    def slope(self, rho: float) -> float:
        if not self.slopes.covers(rho):
            warnings.warn(
                f"density {rho} outside calibrated range {self.slopes.densities[0]}..{self.slopes.densities[-1]}",
                ExtrapolationWarning,
                stacklevel=2,
            )
        return float(self.slopes(rho))


def calibrate_gap_slopes(lattice: LatticeCalibration) -> GapResponse:
    """slope(rho) = S(rho) * F_op(rho) / 6 mm at each anchor density."""
    rho = lattice.densities
    slopes = tuple(a.sensitivity * a.f_op / DENSIFICATION_MM for a in lattice.anchors)
    return GapResponse(PiecewisePowerLaw(rho, slopes))


def delta_inductance(gap: GapResponse, rho: float, compression: float) -> float:
    """Inductance change in uH; clamps (with a warning) past the linear span."""
    if compression < 0:
        raise ValueError("compression must be non-negative")
    if compression > gap.linear_span:
        warnings.warn(f"compression {compression} mm beyond linear span", SaturationWarning, stacklevel=2)
        compression = gap.linear_span
    if compression == 0:
        return 0.0
    return gap.slope(rho) * compression


def crosstalk_response(active_cell: tuple[int, int], neighbor_cell: tuple[int, int]) -> float:
    """Change on ``neighbor_cell`` caused by loading ``active_cell``.

    Neighbouring coils were measured to be electromagnetically isolated, so
    this is identically zero.
    """
    if tuple(active_cell) == tuple(neighbor_cell):
        raise ValueError("crosstalk is only defined between distinct cells")
    return 0.0


@dataclass(frozen=True)
class SensorFrame:
    t: float
    delta_l: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.delta_l)
        if any(v < 0 for v in values):
            raise ValueError("delta_l values must be non-negative")
        object.__setattr__(self, "delta_l", values)

    def as_grid(self, array: CoilArraySpec = CoilArraySpec()) -> np.ndarray:
        return np.asarray(self.delta_l).reshape(array.rows, array.cols)


def frame_from_compression(
    smap: StiffnessMap, compression, t: float, gap: GapResponse, array: CoilArraySpec = CoilArraySpec()
) -> SensorFrame:
    comp = np.asarray(compression, dtype=float).reshape(array.rows, array.cols)
    values = [delta_inductance(gap, smap.at(cell), float(comp[cell])) for cell in array.cells()]
    return SensorFrame(t, tuple(values))


def cell_compressions(
    smap: StiffnessMap, load_field, lattice: LatticeCalibration, array: CoilArraySpec = CoilArraySpec()
) -> np.ndarray:
    loads = np.asarray(load_field, dtype=float)
    if loads.shape != (array.rows, array.cols):
        raise ValueError(f"load field must have shape {(array.rows, array.cols)}, got {loads.shape}")
    if np.any(loads < 0):
        raise ValueError("loads must be non-negative")
    comp = np.zeros_like(loads)
    for cell in array.cells():
        load = float(loads[cell])
        if load == 0:
            continue
        model = lattice.model(smap.at(cell), smap.cell_size)
        if load > model.f_op:
            raise DensificationError(
                f"cell {cell}: load {load:.4g} N exceeds operational range {model.f_op:.4g} N", cell=cell
            )
        comp[cell] = compression_for_force(model, load)
    return comp


def simulate_frame(
    array: CoilArraySpec,
    smap: StiffnessMap,
    load_field,
    t: float,
    lattice: LatticeCalibration,
    gap: GapResponse,
) -> SensorFrame:
    """Frame produced by a per-cell normal load field (N)."""
    comp = cell_compressions(smap, load_field, lattice, array)
    return frame_from_compression(smap, comp, t, gap, array)


def recovered_loads(
    frame: SensorFrame, smap: StiffnessMap, lattice: LatticeCalibration, gap: GapResponse,
    array: CoilArraySpec = CoilArraySpec(),
) -> np.ndarray:
    """Invert each channel back to the normal force on its cell."""
    grid = frame.as_grid(array)
    out = np.zeros_like(grid)
    for cell in array.cells():
        if grid[cell] == 0:
            continue
        rho = smap.at(cell)
        d = grid[cell] / gap.slope(rho)
        out[cell] = loading_force(lattice.model(rho, smap.cell_size), d)
    return out


# ---------------------------------------------------------------------------
# Indentation cycles (characterisation rig)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndentationCycle:
    """Force and frame logs of one displacement-controlled load/unload cycle."""

    t: np.ndarray
    displacement: np.ndarray
    force: np.ndarray
    frames: tuple[SensorFrame, ...]
    cell: tuple[int, int]


def simulate_indentation_cycle(
    lattice: LatticeCalibration,
    gap: GapResponse,
    rho: float,
    cell: tuple[int, int] = (0, 0),
    peak: float = DENSIFICATION_MM,
    speed: float = 0.5,
    rate_hz: float = FRAME_RATE_HZ,
    t0: float = 0.0,
    array: CoilArraySpec = CoilArraySpec(),
) -> IndentationCycle:
    """Triangle displacement cycle 0 -> peak -> 0 on a uniformly covered tile.

    The indenter moves at ``speed`` mm/s and both streams are sampled at
    ``rate_hz``. Loading and unloading share the same displacement grid.
    """
    smap = StiffnessMap.uniform(rho)
    model = lattice.model(rho)
    n_half = max(int(round(peak / speed * rate_hz)), 1)
    up = np.arange(n_half + 1) * (peak / n_half)
    up[-1] = peak
    down = up[-2::-1]
    disp = np.concatenate([up, down])
    force = np.concatenate([loading_force(model, up), unloading_force(model, down, peak)])
    t = t0 + np.arange(disp.size) / rate_hz
    frames = []
    for ti, d in zip(t, disp):
        comp = np.zeros((array.rows, array.cols))
        comp[cell] = d
        frames.append(frame_from_compression(smap, comp, float(ti), gap, array))
    return IndentationCycle(t, disp, force, tuple(frames), tuple(cell))


# ---------------------------------------------------------------------------
# CSV logs
# ---------------------------------------------------------------------------


def frame_csv_header(array: CoilArraySpec = CoilArraySpec()) -> list[str]:
    return ["t_s", *array.channel_names()]


def write_frames_csv(path, frames: Iterable[SensorFrame], array: CoilArraySpec = CoilArraySpec()) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(frame_csv_header(array))
        for fr in frames:
            writer.writerow([repr(fr.t), *(repr(v) for v in fr.delta_l)])


def read_frames_csv(path, array: CoilArraySpec = CoilArraySpec()) -> list[SensorFrame]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != frame_csv_header(array):
            raise ValueError(f"{path}: expected header {','.join(frame_csv_header(array))}")
        return [SensorFrame(float(row[0]), tuple(float(v) for v in row[1:])) for row in reader if row]


def write_force_csv(path, t: Sequence[float], force: Sequence[float], displacement: Sequence[float] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if displacement is None:
            writer.writerow(["t_s", "force_n"])
            writer.writerows([repr(float(a)), repr(float(b))] for a, b in zip(t, force))
        else:
            writer.writerow(["t_s", "force_n", "disp_mm"])
            writer.writerows(
                [repr(float(a)), repr(float(b)), repr(float(c))] for a, b, c in zip(t, force, displacement)
            )


def read_force_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if fields[:2] != ["t_s", "force_n"]:
            raise ValueError(f"{path}: force CSV must start with t_s,force_n")
        rows = list(reader)
    return {k: np.array([float(r[k]) for r in rows]) for k in fields}
