"""Quasi-static mechanics of gyroid lattice pads.

A pad is loaded by a flat indenter up to half its height. The loading branch
is linear up to ``d_lin`` and then follows a power-law correction that hits
the operational force exactly at the densification displacement. The
unloading branch is the loading branch scaled down by a sine-shaped bump so
that the closed loop carries a prescribed hysteresis.

Per-density quantities (stiffness, force range, sensitivity, hysteresis) come
from anchor measurements at a handful of relative densities and are
interpolated piecewise in log-log space.
"""

from __future__ import annotations

import csv
import enum
import functools
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DENSITY_MIN = 0.07
DENSITY_MAX = 0.30
CELL_SIZE_MIN = 2.2
CELL_SIZE_MAX = 4.0
REFERENCE_CELL_SIZE = 3.0

LINEAR_LIMIT_MM = 2.0
DENSIFICATION_MM = 6.0
DEFAULT_STIFFENING_EXPONENT = 3.0

ANCHOR_CSV_HEADER = (
    "relative_density",
    "k0_n_per_mm",
    "f_op_n",
    "sensitivity_uh_per_n",
    "hysteresis_pct",
)

# force-range multiplier relative to the 3 mm cell
CELL_SIZE_FACTORS = ((2.2, 1 / 1.70), (3.0, 1.0), (4.0, 1 / 1.35))


class CalibrationError(ValueError):
    """Anchor data cannot produce a valid calibration."""


class DensificationError(ValueError):
    """A load or displacement reaches into the densified (unreliable) regime."""

    def __init__(self, message: str, cell: tuple[int, int] | None = None):
        super().__init__(message)
        self.cell = cell


class AlignmentError(ValueError):
    """Two sampled branches do not share a displacement grid."""


class UnsupportedTopologyError(ValueError):
    pass


class Topology(str, enum.Enum):
    GYROID = "Gyroid"
    SCHWARZ_D = "SchwarzD"
    XCELL_STRUT = "XCellStrut"


@dataclass(frozen=True)
class LatticeSpec:
    topology: Topology = Topology.GYROID
    cell_size: float = REFERENCE_CELL_SIZE
    relative_density: float = 0.10
    thickness: float = 12.0
    planar_side: float = 37.5

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if self.thickness <= 0:
            raise ValueError(f"thickness must be positive, got {self.thickness}")
        if self.planar_side <= 0:
            raise ValueError(f"planar_side must be positive, got {self.planar_side}")


@dataclass(frozen=True)
class PrintabilityReport:
    spec: LatticeSpec
    violations: tuple[str, ...] = ()

    @property
    def printable(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.printable


def density_violations(rho: float) -> list[str]:
    if rho < DENSITY_MIN:
        return [
            f"relative density {rho:.3g} below the 7 % floor: the lattice cannot support itself"
        ]
    if rho > DENSITY_MAX:
        return [
            f"relative density {rho:.3g} above the 30 % ceiling: uncured resin gets trapped"
        ]
    return []


def check_printability(spec: LatticeSpec) -> PrintabilityReport:
    """List every printability constraint the lattice violates."""
    violations = density_violations(spec.relative_density)
    if spec.cell_size < CELL_SIZE_MIN:
        violations.append(f"cell size {spec.cell_size:.3g} mm below 2.2 mm")
    elif spec.cell_size > CELL_SIZE_MAX:
        violations.append(f"cell size {spec.cell_size:.3g} mm above 4.0 mm")
    return PrintabilityReport(spec, tuple(violations))


def cell_size_factor(cell_size: float) -> float:
    """Force-range multiplier for a cell size, piecewise linear between anchors."""
    if not CELL_SIZE_MIN <= cell_size <= CELL_SIZE_MAX:
        raise ValueError(f"cell size {cell_size} mm outside printable range [2.2, 4.0]")
    sizes, factors = zip(*CELL_SIZE_FACTORS)
    return float(np.interp(cell_size, sizes, factors))


# ---------------------------------------------------------------------------
# Loading / unloading curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MechanicalModel:
    """Force-displacement law of one lattice pad.

    Parameters
    ----------
    k0 : float
        Initial stiffness in N/mm, valid up to ``d_lin``.
    f_op : float
        Loading force at ``densification_disp`` in N.
    hysteresis_ratio : float
        Largest loading/unloading gap of a full cycle as a fraction of the
        peak loading force.
    stiffening_exponent : float
        Exponent ``p`` of the post-linear correction ``c * (d - d_lin) ** p``.
    """

    k0: float
    f_op: float
    hysteresis_ratio: float = 0.0
    stiffening_exponent: float = DEFAULT_STIFFENING_EXPONENT
    d_lin: float = LINEAR_LIMIT_MM
    densification_disp: float = DENSIFICATION_MM

    def __post_init__(self):
        if self.k0 <= 0 or self.f_op <= 0:
            raise CalibrationError("k0 and f_op must be positive")
        if not 0 <= self.hysteresis_ratio < 1:
            raise CalibrationError(f"hysteresis ratio {self.hysteresis_ratio} not in [0, 1)")
        if self.stiffening_exponent < 1:
            raise CalibrationError("stiffening exponent must be >= 1")
        if not 0 < self.d_lin < self.densification_disp:
            raise CalibrationError("need 0 < d_lin < densification_disp")
        if self.min_slope() <= 0:
            raise CalibrationError(
                f"loading curve k0={self.k0}, f_op={self.f_op}, p={self.stiffening_exponent} "
                "is not strictly increasing"
            )

    @classmethod
    def from_targets(
        cls,
        k0: float,
        f_op: float,
        hysteresis_ratio: float = 0.0,
        stiffening_exponent: float = DEFAULT_STIFFENING_EXPONENT,
    ) -> "MechanicalModel":
        """Build a model, lowering the exponent if needed to stay monotone.

        When ``f_op < k0 * densification_disp`` the correction term is negative
        and the slope at full stroke is ``k0 + p * (f_op - k0*D) / (D - d_lin)``.
        That stays positive only for ``p`` below a bound; the exponent is capped
        halfway between 1 and that bound.
        """
        D, dl = DENSIFICATION_MM, LINEAR_LIMIT_MM
        if f_op <= k0 * dl:
            raise CalibrationError(
                f"f_op={f_op} N does not exceed the linear-region force {k0 * dl} N"
            )
        p = stiffening_exponent
        deficit = k0 * D - f_op
        if deficit > 0:
            p_max = k0 * (D - dl) / deficit
            if p >= p_max:
                p = 1.0 + 0.5 * (p_max - 1.0)
        return cls(k0, f_op, hysteresis_ratio, p)

    @functools.cached_property
    def stiffening_coefficient(self) -> float:
        span = self.densification_disp - self.d_lin
        return (self.f_op - self.k0 * self.densification_disp) / span**self.stiffening_exponent

    @property
    def stiffening(self) -> bool:
        return self.f_op >= self.k0 * self.densification_disp

    def slope(self, d):
        d = np.asarray(d, dtype=float)
        extra = np.clip(d - self.d_lin, 0.0, None)
        p = self.stiffening_exponent
        return self.k0 + p * self.stiffening_coefficient * extra ** (p - 1)

    def min_slope(self) -> float:
        # slope is monotone beyond d_lin, so the minimum sits at an end point
        return float(min(self.slope(0.0), self.slope(self.densification_disp)))


def _check_range(d, upper: float, what: str = "displacement"):
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"{what} must be non-negative")
    if np.any(arr > upper * (1 + 1e-12)):
        raise DensificationError(
            f"{what} {float(np.max(arr)):.6g} mm beyond {upper} mm: densified region is unreliable"
        )
    return arr


def loading_force(model: MechanicalModel, d):
    """Loading-branch force in N at displacement ``d`` mm (scalar or array)."""
    arr = _check_range(d, model.densification_disp)
    extra = np.clip(arr - model.d_lin, 0.0, None)
    force = model.k0 * arr + model.stiffening_coefficient * extra**model.stiffening_exponent
    return float(force) if np.ndim(force) == 0 else force


@functools.lru_cache(maxsize=256)
def _bump_amplitude(model: MechanicalModel, d_peak: float) -> float:
    """Scale ``a`` such that max of F_load * a * sin(pi d / d_peak) equals h * F_load(d_peak)."""
    if model.hysteresis_ratio == 0 or d_peak == 0:
        return 0.0
    grid = np.linspace(0.0, d_peak, 4001)
    gap = loading_force(model, grid) * np.sin(np.pi * grid / d_peak)
    i = int(np.argmax(gap))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    # golden-section refinement on the bracketing interval
    inv_phi = (math.sqrt(5) - 1) / 2
    f = lambda x: loading_force(model, x) * math.sin(math.pi * x / d_peak)  # noqa: E731
    for _ in range(80):
        a = hi - inv_phi * (hi - lo)
        b = lo + inv_phi * (hi - lo)
        if f(a) > f(b):
            hi = b
        else:
            lo = a
    peak_gap = max(f(0.5 * (lo + hi)), float(gap[i]))
    amplitude = model.hysteresis_ratio * loading_force(model, d_peak) / peak_gap
    if amplitude >= 1:
        raise CalibrationError(f"hysteresis {model.hysteresis_ratio} cannot be realised at d_peak={d_peak}")
    return amplitude


def unloading_force(model: MechanicalModel, d, d_peak: float):
    """Unloading-branch force after loading to ``d_peak``."""
    _check_range(d_peak, model.densification_disp, "peak displacement")
    arr = _check_range(d, model.densification_disp)
    if np.any(arr > d_peak):
        raise ValueError("unloading displacement exceeds the cycle peak")
    if d_peak == 0:
        return 0.0 if np.ndim(arr) == 0 else np.zeros_like(arr)
    amp = _bump_amplitude(model, float(d_peak))
    force = loading_force(model, arr) * (1.0 - amp * np.sin(np.pi * arr / d_peak))
    # sin(pi) is 1.2e-16, not 0; pin the loop closure
    force = np.where(arr == d_peak, loading_force(model, d_peak), force)
    return float(force) if np.ndim(force) == 0 else force


def compression_for_force(
    model: MechanicalModel, force: float, tol: float = 1e-9, max_iter: int = 200
) -> float:
    """Invert the loading branch by bisection on [0, densification_disp]."""
    if force < 0:
        raise ValueError("force must be non-negative")
    if force == 0:
        return 0.0
    if force > model.f_op:
        raise DensificationError(f"load {force:.6g} N exceeds operational range {model.f_op:.6g} N")
    if force <= model.k0 * model.d_lin:
        return force / model.k0
    lo, hi = model.d_lin, model.densification_disp
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = loading_force(model, mid) - force
        if abs(err) <= tol:
            break
        if err < 0:
            lo = mid
        else:
            hi = mid
    return mid


# ---------------------------------------------------------------------------
# Metrics on sampled curves
# ---------------------------------------------------------------------------


def effective_stiffness(displacement, force, d_max: float = LINEAR_LIMIT_MM) -> float:
    """Least-squares slope through the origin over samples with d <= d_max."""
    d = np.asarray(displacement, dtype=float)
    f = np.asarray(force, dtype=float)
    mask = d <= d_max + 1e-12
    if np.count_nonzero(mask) < 2:
        raise ValueError(f"need at least 2 samples within {d_max} mm")
    d, f = d[mask], f[mask]
    denom = float(np.dot(d, d))
    if denom == 0:
        raise ValueError("all samples at zero displacement")
    return float(np.dot(d, f) / denom)


def operational_force_range(model: MechanicalModel) -> float:
    return loading_force(model, DENSIFICATION_MM)


def hysteresis_metric(loading, unloading) -> float:
    """Largest loading/unloading gap as a percentage of full-scale loading force.

    ``loading`` and ``unloading`` are ``(displacement, force)`` pairs sampled on
    the same displacement grid (in any order).
    """
    d_l, f_l = (np.asarray(a, dtype=float) for a in loading)
    d_u, f_u = (np.asarray(a, dtype=float) for a in unloading)
    il, iu = np.argsort(d_l, kind="stable"), np.argsort(d_u, kind="stable")
    d_l, f_l, d_u, f_u = d_l[il], f_l[il], d_u[iu], f_u[iu]
    if d_l.shape != d_u.shape or not np.allclose(d_l, d_u, rtol=0, atol=1e-9):
        raise AlignmentError("loading and unloading branches are not on a common grid")
    full_scale = float(np.max(np.abs(f_l)))
    if full_scale <= 0:
        raise ValueError("full-scale response must be positive")
    return float(np.max(np.abs(f_l - f_u)) / full_scale * 100.0)


# ---------------------------------------------------------------------------
# Density scaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Anchor:
    relative_density: float
    k0: float
    f_op: float
    sensitivity: float
    hysteresis_pct: float

    def quantity(self, name: str) -> float:
        return getattr(self, name)


QUANTITIES = ("k0", "f_op", "sensitivity", "hysteresis_pct")


@dataclass(frozen=True)
class DensityScalingLaw:
    """Power law ``q = coefficient * rho ** exponent`` from a log-log fit.

    ``residuals`` holds ``predicted / observed - 1`` for each anchor.
    """

    coefficient: float
    exponent: float
    densities: tuple[float, ...] = ()
    residuals: tuple[float, ...] = ()

    def __call__(self, rho):
        return self.coefficient * np.asarray(rho, dtype=float) ** self.exponent

    @classmethod
    def fit(cls, densities: Sequence[float], values: Sequence[float]) -> "DensityScalingLaw":
        x = np.log(np.asarray(densities, dtype=float))
        y = np.log(np.asarray(values, dtype=float))
        b, log_a = np.polyfit(x, y, 1)
        a = math.exp(log_a)
        pred = a * np.exp(x) ** b
        resid = tuple(float(r) for r in pred / np.exp(y) - 1.0)
        return cls(a, float(b), tuple(float(r) for r in densities), resid)


@dataclass(frozen=True)
class PiecewisePowerLaw:
    """Log-log linear interpolation through anchor points; end segments extrapolate."""

    densities: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.densities) < 2 or len(self.densities) != len(self.values):
            raise CalibrationError("need at least two (density, value) points")
        if any(np.diff(self.densities) <= 0):
            raise CalibrationError("densities must be strictly increasing")

    def __call__(self, rho):
        x = np.log(np.asarray(self.densities))
        y = np.log(np.asarray(self.values))
        r = np.log(np.asarray(rho, dtype=float))
        i = np.clip(np.searchsorted(x, r) - 1, 0, x.size - 2)
        slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i])
        out = np.exp(y[i] + slope * (r - x[i]))
        return float(out) if np.ndim(out) == 0 else out

    def covers(self, rho: float) -> bool:
        return self.densities[0] - 1e-12 <= rho <= self.densities[-1] + 1e-12


class LatticeCalibration:
    """Per-density mechanical and sensing quantities from anchor measurements.

    Models are evaluated from piecewise power laws through the anchors, so
    every anchor density is reproduced exactly. The global least-squares laws
    in ``laws`` are kept for reporting.
    """

    def __init__(self, anchors: Sequence[Anchor], stiffening_exponent: float = DEFAULT_STIFFENING_EXPONENT):
        self.anchors = tuple(sorted(anchors, key=lambda a: a.relative_density))
        self.stiffening_exponent = stiffening_exponent
        rho = [a.relative_density for a in self.anchors]
        self.laws = {q: DensityScalingLaw.fit(rho, [a.quantity(q) for a in self.anchors]) for q in QUANTITIES}
        self.curves = {q: PiecewisePowerLaw(tuple(rho), tuple(a.quantity(q) for a in self.anchors)) for q in QUANTITIES}
        self._models: dict[tuple, MechanicalModel] = {}

    @property
    def densities(self) -> tuple[float, ...]:
        return tuple(a.relative_density for a in self.anchors)

    def k0(self, rho):
        return self.curves["k0"](rho)

    def f_op(self, rho, cell_size: float = REFERENCE_CELL_SIZE):
        return self.curves["f_op"](rho) * cell_size_factor(cell_size)

    def sensitivity(self, rho):
        return self.curves["sensitivity"](rho)

    def hysteresis_pct(self, rho):
        return self.curves["hysteresis_pct"](rho)

    def model(
        self,
        rho: float,
        cell_size: float = REFERENCE_CELL_SIZE,
        topology: Topology | str = Topology.GYROID,
    ) -> MechanicalModel:
        if Topology(topology) is not Topology.GYROID:
            raise UnsupportedTopologyError(f"no calibration data for topology {Topology(topology).value}")
        key = (round(float(rho), 12), round(float(cell_size), 12))
        model = self._models.get(key)
        if model is None:
            model = MechanicalModel.from_targets(
                float(self.k0(rho)),
                float(self.f_op(rho, cell_size)),
                float(self.hysteresis_pct(rho)) / 100.0,
                self.stiffening_exponent,
            )
            self._models[key] = model
        return model

    def to_dict(self) -> dict:
        return {
            "anchors": [asdict(a) for a in self.anchors],
            "laws": {
                q: {
                    "coefficient": law.coefficient,
                    "exponent": law.exponent,
                    "residuals": dict(zip(map(str, law.densities), law.residuals)),
                }
                for q, law in self.laws.items()
            },
        }


def calibrate_from_anchors(anchors: Iterable[Anchor | Sequence[float]], **kwargs) -> LatticeCalibration:
    parsed = [a if isinstance(a, Anchor) else Anchor(*map(float, a)) for a in anchors]
    if len(parsed) < 2:
        raise CalibrationError("need at least two anchors")
    rho = [a.relative_density for a in parsed]
    if len(set(rho)) != len(rho):
        raise CalibrationError("anchor densities must be distinct")
    for a in parsed:
        if min(a.relative_density, a.k0, a.f_op, a.sensitivity, a.hysteresis_pct) <= 0:
            raise CalibrationError(f"non-positive value in anchor {a}")
    return LatticeCalibration(parsed, **kwargs)


def read_anchor_csv(path) -> list[Anchor]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ANCHOR_CSV_HEADER:
            raise CalibrationError(f"anchor CSV header must be {','.join(ANCHOR_CSV_HEADER)}")
        return [Anchor(*(float(row[k]) for k in ANCHOR_CSV_HEADER)) for row in reader]


def default_anchors() -> list[Anchor]:
    with resources.as_file(resources.files("copess") / "data" / "table1.csv") as p:
        return read_anchor_csv(Path(p))
