"""Rigid objects moving on a tilting, stiffness-patterned tile.

The object is a point mass (optionally with a disc footprint for load
splitting). Resistance to motion is Coulomb-like with a static and a kinetic
coefficient that both depend on the relative density of the cell under the
object's center: softer pads indent deeper and resist more. Integration is
fixed-step semi-implicit Euler, so a scenario always produces the same logs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .inductive_sensing import FRAME_RATE_HZ, GapResponse, SensorFrame, frame_from_compression
from .lattice_mechanics import (
    CalibrationError,
    DensificationError,
    LatticeCalibration,
    MechanicalModel,
    PiecewisePowerLaw,
    compression_for_force,
)
from .tile import CoilArraySpec, StiffnessMap, footprint_fractions

G = 9.81  # m/s^2
G_MM = G * 1000.0  # mm/s^2
V_EPS = 0.1  # mm/s, stiction capture speed
DEFAULT_DT = 1e-3

TRAJECTORY_HEADER = ["t_s", "x_mm", "y_mm", "vx_mm_s", "vy_mm_s", "indent_mm", "cell_density"]


@dataclass(frozen=True)
class ObjectSpec:
    mass: float = 0.5  # kg
    footprint_radius: float = 0.0  # mm; 0 means point contact
    kind: str = "rigid"  # metadata only

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("mass must be non-negative")
        if self.footprint_radius < 0:
            raise ValueError("footprint radius must be non-negative")
        if self.kind not in ("rigid", "soft"):
            raise ValueError(f"object kind must be 'rigid' or 'soft', got {self.kind!r}")

    @property
    def weight(self) -> float:
        return self.mass * G


@dataclass(frozen=True)
class TiltSchedule:
    """Piecewise-linear tilt angle (deg) about one in-plane axis.

    A positive angle lowers the far end of ``axis`` so gravity pulls toward
    increasing coordinate. The angle is held constant outside the knots.
    """

    knots: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    axis: str = "x"

    def __post_init__(self):
        knots = tuple((float(t), float(a)) for t, a in self.knots)
        object.__setattr__(self, "knots", knots)
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not self.knots:
            out.append("tilt schedule needs at least one knot")
        if self.axis not in ("x", "y"):
            out.append(f"tilt axis must be 'x' or 'y', got {self.axis!r}")
        times = [t for t, _ in self.knots]
        if any(b <= a for a, b in zip(times, times[1:])):
            out.append("tilt schedule times must be strictly increasing")
        if any(abs(a) > 90 for _, a in self.knots):
            out.append("tilt angles must lie within +/-90 deg")
        return out

    @classmethod
    def ramp(cls, amplitude: float = 20.0, rate: float = 0.2, axis: str = "x") -> "TiltSchedule":
        """0 -> +amplitude -> -amplitude -> 0 at ``rate`` deg/s."""
        quarter = amplitude / rate
        return cls(((0.0, 0.0), (quarter, amplitude), (3 * quarter, -amplitude), (4 * quarter, 0.0)), axis)

    @classmethod
    def hold(cls, angle: float, rise_time: float = 0.5, axis: str = "x") -> "TiltSchedule":
        return cls(((0.0, 0.0), (rise_time, angle)), axis)

    @classmethod
    def flat(cls, axis: str = "x") -> "TiltSchedule":
        return cls(((0.0, 0.0),), axis)

    def angle(self, t):
        times, angles = zip(*self.knots)
        out = np.interp(t, times, angles)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FrictionModel:
    """Density-dependent static and kinetic resistance coefficients.

    ``mu_k = kinetic_ratio * mu_s``. ``v0`` is the impulse speed (mm/s)
    recovered from the stopping-distance anchors.
    """

    static: PiecewisePowerLaw
    kinetic_ratio: float = 1.0
    v0: float | None = None
    stopping_residuals: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0 < self.kinetic_ratio <= 1:
            raise CalibrationError(f"kinetic ratio {self.kinetic_ratio} not in (0, 1]")

    def mu_s(self, rho):
        return self.static(rho)

    def mu_k(self, rho):
        return self.kinetic_ratio * self.static(rho)

    def stopping_distance(self, rho: float, v0: float | None = None) -> float:
        """Flat-tile stopping distance (mm) from speed ``v0`` under kinetic resistance."""
        v = self.v0 if v0 is None else v0
        return v * v / (2.0 * G_MM * float(self.mu_k(rho)))


def calibrate_friction(
    tilt_anchors: Sequence[tuple[float, float]],
    stopping: Sequence[tuple[float, float]] = (),
    v0: float | None = None,
    kinetic_ratio: float | None = None,
) -> FrictionModel:
    """Fit resistance coefficients to initiation tilts and stopping distances.

    Static coefficients are ``tan(theta_start)`` at each anchor density and
    are interpolated as a power law in between. Stopping distance on a flat
    tile is ``v0**2 / (2 g r mu_s)``, so only ``v0**2 / r`` is identifiable
    from stopping anchors: give ``v0`` to solve for ``r``, or ``kinetic_ratio``
    (default 1) to solve for ``v0``. The fit is least squares in log distance.
    """
    if len(tilt_anchors) < 2:
        raise CalibrationError("need at least two initiation-tilt anchors")
    pts = sorted((float(r), math.tan(math.radians(float(a)))) for r, a in tilt_anchors)
    rho, mu = zip(*pts)
    if any(b >= a for a, b in zip(mu, mu[1:])):
        raise CalibrationError("static resistance must decrease strictly with density")
    static = PiecewisePowerLaw(tuple(rho), tuple(mu))
    if v0 is not None and kinetic_ratio is not None:
        raise ValueError("give at most one of v0 and kinetic_ratio")
    if not stopping:
        return FrictionModel(static, 1.0 if kinetic_ratio is None else kinetic_ratio, v0)
    if any(float(s) <= 0 for _, s in stopping):
        raise CalibrationError("stopping distances must be positive")

    # log s = log(v0^2 / r) - log(2 g mu_s)
    log_terms = [math.log(s) + math.log(2.0 * G_MM * float(static(r))) for r, s in stopping]
    k = math.exp(sum(log_terms) / len(log_terms))
    if v0 is not None:
        ratio = v0 * v0 / k
        if not 0 < ratio <= 1:
            raise CalibrationError(f"impulse {v0} mm/s implies kinetic ratio {ratio:.3g} outside (0, 1]")
        speed = float(v0)
    else:
        ratio = 1.0 if kinetic_ratio is None else float(kinetic_ratio)
        speed = math.sqrt(k * ratio)
    model = FrictionModel(static, ratio, speed)
    resid = tuple(model.stopping_distance(r) / s - 1.0 for r, s in stopping)
    return replace(model, stopping_residuals=resid)


@dataclass(frozen=True)
class ObjectState:
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    indentation: float = 0.0
    moving: bool = False
    off_edge: bool = False

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


def quasi_static_indentation(obj: ObjectSpec, model: MechanicalModel, tilt: float = 0.0) -> float:
    """Pad compression (mm) under the object's full normal load."""
    load = obj.weight * math.cos(math.radians(tilt))
    if load > model.f_op:
        raise DensificationError(f"normal load {load:.4g} N exceeds operational range {model.f_op:.4g} N")
    return compression_for_force(model, load)


def min_initiation_tilt(
    smap: StiffnessMap, friction: FrictionModel, position: tuple[float, float], array: CoilArraySpec = CoilArraySpec()
) -> float:
    """Smallest tilt (deg) that starts a resting object moving at ``position``."""
    cell = array.cell_at(*position)
    if cell is None:
        raise ValueError(f"position {position} is off the tile")
    return math.degrees(math.atan(float(friction.mu_s(smap.at(cell)))))


def _advance(x, y, vx, vy, dt, sin_t, cos_t, axis, mu_s, mu_k):
    """One semi-implicit Euler step. Returns (x, y, vx, vy)."""
    gt = G_MM * sin_t
    gx, gy = (gt, 0.0) if axis == "x" else (0.0, gt)
    gn = G_MM * cos_t
    speed = math.hypot(vx, vy)
    if speed < V_EPS:
        if abs(gt) <= mu_s * gn:
            return x, y, 0.0, 0.0
        ux, uy = (math.copysign(1.0, gt), 0.0) if axis == "x" else (0.0, math.copysign(1.0, gt))
        nvx = vx + (gx - mu_k * gn * ux) * dt
        nvy = vy + (gy - mu_k * gn * uy) * dt
    else:
        nvx = vx + (gx - mu_k * gn * vx / speed) * dt
        nvy = vy + (gy - mu_k * gn * vy / speed) * dt
        if nvx * vx + nvy * vy <= 0.0:
            # resistance stops the object; it cannot reverse it
            nvx = nvy = 0.0
    return x + nvx * dt, y + nvy * dt, nvx, nvy


def step(
    state: ObjectState,
    dt: float,
    tilt: float,
    smap: StiffnessMap,
    friction: FrictionModel,
    *,
    axis: str = "x",
    obj: ObjectSpec | None = None,
    lattice: LatticeCalibration | None = None,
    array: CoilArraySpec = CoilArraySpec(),
) -> ObjectState:
    """Advance one timestep. Indentation is refreshed when ``obj`` and ``lattice`` are given."""
    cell = array.cell_at(state.x, state.y)
    if cell is None:
        raise ValueError("object is off the tile")
    rho = smap.at(cell)
    th = math.radians(tilt)
    x, y, vx, vy = _advance(
        state.x, state.y, state.vx, state.vy, dt, math.sin(th), math.cos(th), axis,
        float(friction.mu_s(rho)), float(friction.mu_k(rho)),
    )
    moving = vx != 0.0 or vy != 0.0
    if not array.contains(x, y):
        return ObjectState(x, y, vx, vy, 0.0, moving, off_edge=True)
    indent = state.indentation
    if obj is not None and lattice is not None:
        indent = _center_indentation(obj, smap, lattice, array, x, y, tilt)
    return ObjectState(x, y, vx, vy, indent, moving)


def load_field(obj: ObjectSpec, x: float, y: float, tilt: float, array: CoilArraySpec = CoilArraySpec()) -> np.ndarray:
    normal = obj.weight * math.cos(math.radians(tilt))
    return normal * footprint_fractions(array, x, y, obj.footprint_radius)


def _center_indentation(obj, smap, lattice, array, x, y, tilt) -> float:
    cell = array.cell_at(x, y)
    share = float(load_field(obj, x, y, tilt, array)[cell])
    model = lattice.model(smap.at(cell), smap.cell_size)
    if share > model.f_op:
        raise DensificationError(f"cell {cell}: load {share:.4g} N exceeds {model.f_op:.4g} N", cell=cell)
    return compression_for_force(model, share)


# ---------------------------------------------------------------------------
# Scenario and simulation
# ---------------------------------------------------------------------------


def integration_violations(dt: float, duration: float, frame_hz: float, initial: ObjectState) -> list[str]:
    out = []
    if not dt > 0:
        out.append("timestep must be positive")
    if not duration >= 0:
        out.append("duration must be non-negative")
    if not frame_hz > 0:
        out.append("frame rate must be positive")
    elif dt > 0:
        ratio = 1.0 / (dt * frame_hz)
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
            out.append(f"frame rate {frame_hz:g} Hz must divide the integration rate {1 / dt:g} Hz")
    if not CoilArraySpec().contains(initial.x, initial.y):
        out.append(f"initial position ({initial.x}, {initial.y}) is off the tile")
    return out


@dataclass(frozen=True)
class Scenario:
    smap: StiffnessMap
    obj: ObjectSpec = ObjectSpec()
    schedule: TiltSchedule = field(default_factory=TiltSchedule.ramp)
    initial: ObjectState = ObjectState(18.75, 56.25)
    dt: float = DEFAULT_DT
    duration: float = 400.0
    frame_hz: float = FRAME_RATE_HZ
    seed: int = 0  # reserved; the dynamics use no randomness

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        return integration_violations(self.dt, self.duration, self.frame_hz, self.initial)

    @property
    def steps_per_frame(self) -> int:
        return int(round(1.0 / (self.dt * self.frame_hz)))


@dataclass(frozen=True)
class TrajectoryLog:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    indentation: np.ndarray
    cell_density: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def rows(self):
        return zip(self.t, self.x, self.y, self.vx, self.vy, self.indentation, self.cell_density)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRAJECTORY_HEADER)
            for row in self.rows():
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "TrajectoryLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            if next(reader, None) != TRAJECTORY_HEADER:
                raise ValueError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
            data = np.array([[float(v) for v in row] for row in reader if row], dtype=float).reshape(-1, 7)
        return cls(*data.T)


@dataclass(frozen=True)
class SimulationResult:
    trajectory: TrajectoryLog
    frames: tuple[SensorFrame, ...]
    termination: str  # "completed" | "off_edge" | "densification"
    final: ObjectState
    message: str = ""

    @property
    def travel(self) -> float:
        """Straight-line distance from the start to the final position (mm)."""
        tr = self.trajectory
        return math.hypot(self.final.x - tr.x[0], self.final.y - tr.y[0])


def simulate(
    scenario: Scenario,
    lattice: LatticeCalibration,
    gap: GapResponse,
    friction: FrictionModel,
    array: CoilArraySpec = CoilArraySpec(),
) -> SimulationResult:
    """Integrate a scenario, logging state and a sensor frame at ``frame_hz``.

    Loads are checked against each cell's operational range at every frame
    tick; an overload halts the run with termination ``"densification"``.
    """
    sc = scenario
    smap, obj, axis = sc.smap, sc.obj, sc.schedule.axis
    n_steps = int(round(sc.duration / sc.dt))
    every = sc.steps_per_frame
    times = np.arange(n_steps + 1) * sc.dt
    theta = np.radians(sc.schedule.angle(times))
    sin_t, cos_t = np.sin(theta).tolist(), np.cos(theta).tolist()
    tilt_deg = np.degrees(theta).tolist()

    dens = smap.as_array()
    mu_s = [[float(friction.mu_s(r)) for r in row] for row in dens]
    mu_k = [[float(friction.mu_k(r)) for r in row] for row in dens]
    pitch, nx, ny = array.pitch, array.cols, array.rows
    sx, sy = array.span

    rows: list[tuple] = []
    frames: list[SensorFrame] = []
    st = sc.initial
    x, y, vx, vy = st.x, st.y, st.vx, st.vy

    def record(n: int) -> None:
        t = times[n]
        loads = load_field(obj, x, y, tilt_deg[n], array)
        comp = np.zeros_like(loads)
        for cell in array.cells():
            if loads[cell] == 0:
                continue
            model = lattice.model(dens[cell], smap.cell_size)
            if loads[cell] > model.f_op:
                raise DensificationError(
                    f"t={t:.3f}s cell {cell}: load {loads[cell]:.4g} N exceeds {model.f_op:.4g} N", cell=cell
                )
            comp[cell] = compression_for_force(model, float(loads[cell]))
        cell = array.cell_at(x, y)
        rows.append((t, x, y, vx, vy, float(comp[cell]), float(dens[cell])))
        frames.append(frame_from_compression(smap, comp, float(t), gap, array))

    def finish(termination: str, message: str = "") -> SimulationResult:
        data = np.array(rows, dtype=float).reshape(-1, 7)
        log = TrajectoryLog(*(data[:, k].copy() for k in range(7)))
        indent = float(data[-1, 5])
        indent = 0.0 if math.isnan(indent) else indent
        final = ObjectState(x, y, vx, vy, indent, vx != 0.0 or vy != 0.0, termination == "off_edge")
        return SimulationResult(log, tuple(frames), termination, final, message)

    try:
        record(0)
    except DensificationError as exc:
        cell = array.cell_at(x, y)
        rows.append((0.0, x, y, vx, vy, math.nan, float(dens[cell])))
        return finish("densification", str(exc))

    for n in range(n_steps):
        j = min(int(x // pitch), nx - 1)
        i = min(int(y // pitch), ny - 1)
        x, y, vx, vy = _advance(x, y, vx, vy, sc.dt, sin_t[n], cos_t[n], axis, mu_s[i][j], mu_k[i][j])
        if not (0.0 <= x <= sx and 0.0 <= y <= sy):
            rows.append((times[n + 1], x, y, vx, vy, 0.0, math.nan))
            return finish("off_edge", f"object left the tile at t={times[n + 1]:.3f}s")
        if (n + 1) % every == 0:
            try:
                record(n + 1)
            except DensificationError as exc:
                return finish("densification", str(exc))
    return finish("completed")
