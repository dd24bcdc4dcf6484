"""Signal processing on force and coil-array logs.

Works identically on simulated logs and on recordings from hardware, as long
as they use the CSV layouts in :mod:`copess.inductive_sensing`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from .inductive_sensing import SensorFrame
from .lattice_mechanics import DENSIFICATION_MM, LINEAR_LIMIT_MM, effective_stiffness, hysteresis_metric
from .tile import CoilArraySpec

DEFAULT_NOISE_FLOOR_UH = 0.5
DEFAULT_VELOCITY_WINDOW = 5

LOCALIZATION_HEADER = ["t_s", "x_mm", "y_mm", "confidence_uh"]


class IncompleteCycleError(ValueError):
    pass


@dataclass(frozen=True)
class TimedStream:
    t: np.ndarray
    values: np.ndarray
    rate_hz: float | None = None

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if t.ndim != 1 or values.shape[0] != t.size:
            raise ValueError("need one value row per timestamp")
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.t.size

    @property
    def median_period(self) -> float:
        return float(np.median(np.diff(self.t))) if self.t.size > 1 else math.inf

    @classmethod
    def from_frames(cls, frames: Sequence[SensorFrame], rate_hz: float | None = None) -> "TimedStream":
        return cls(np.array([f.t for f in frames]), np.array([f.delta_l for f in frames]), rate_hz)


@dataclass(frozen=True)
class SyncedPair:
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    b_index: np.ndarray
    error: np.ndarray  # |t_a - t_b| per pair


def nearest_neighbor_sync(a: TimedStream, b: TimedStream) -> SyncedPair:
    """Pair every sample of ``a`` with the closest-in-time sample of ``b``.

    Ties go to the earlier ``b`` sample.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("cannot synchronise an empty stream")
    right = np.clip(np.searchsorted(b.t, a.t, side="left"), 0, len(b) - 1)
    left = np.clip(right - 1, 0, len(b) - 1)
    d_left = np.abs(a.t - b.t[left])
    d_right = np.abs(b.t[right] - a.t)
    idx = np.where(d_left <= d_right, left, right)
    return SyncedPair(a.t, a.values, b.values[idx], idx, np.abs(a.t - b.t[idx]))


# ---------------------------------------------------------------------------
# Localisation and velocity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalizationEstimate:
    t: float
    x: float
    y: float
    confidence: float
    detected: bool = True


def localize(
    frame: SensorFrame, array: CoilArraySpec = CoilArraySpec(), noise_floor: float = DEFAULT_NOISE_FLOOR_UH
) -> LocalizationEstimate:
    """Response-weighted centroid of coil centers above ``noise_floor``."""
    values = frame.as_grid(array)
    mask = values > noise_floor
    if not mask.any():
        return LocalizationEstimate(frame.t, math.nan, math.nan, 0.0, detected=False)
    w = np.where(mask, values, 0.0)
    total = float(w.sum())
    centers = array.centers()
    x = float((w * centers[..., 0]).sum() / total)
    y = float((w * centers[..., 1]).sum() / total)
    return LocalizationEstimate(frame.t, x, y, total)


def localize_track(frames: Sequence[SensorFrame], array: CoilArraySpec = CoilArraySpec(),
                   noise_floor: float = DEFAULT_NOISE_FLOOR_UH) -> list[LocalizationEstimate]:
    return [localize(f, array, noise_floor) for f in frames]


def estimate_velocity(track: Sequence[LocalizationEstimate], window: int = DEFAULT_VELOCITY_WINDOW):
    """Velocity (mm/s) of the detected estimates, one ``(t, vx, vy)`` row each.

    Central differences in time, then a centred moving average that shrinks
    at the ends of the track.
    """
    valid = [e for e in track if e.detected]
    if len(valid) < 2:
        raise ValueError("need at least two valid position estimates")
    t = np.array([e.t for e in valid])
    pos = np.array([[e.x, e.y] for e in valid])
    vel = np.empty_like(pos)
    vel[1:-1] = (pos[2:] - pos[:-2]) / (t[2:] - t[:-2])[:, None]
    vel[0] = (pos[1] - pos[0]) / (t[1] - t[0])
    vel[-1] = (pos[-1] - pos[-2]) / (t[-1] - t[-2])
    if window > 1:
        vel = _centred_mean(vel, window)
    return np.column_stack([t, vel])


def _centred_mean(values: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    n = values.shape[0]
    out = np.empty_like(values)
    for k in range(n):
        h = min(half, k, n - 1 - k)
        out[k] = values[k - h : k + h + 1].mean(axis=0)
    return out


def write_track_csv(path, track: Sequence[LocalizationEstimate]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOCALIZATION_HEADER)
        for e in track:
            writer.writerow([repr(e.t), repr(e.x), repr(e.y), repr(e.confidence)])


# ---------------------------------------------------------------------------
# Characterisation metrics
# ---------------------------------------------------------------------------


def repeatability_correlation(cycles, head: int = 3, tail: int = 3) -> float:
    """Pearson correlation (percent) between the mean head and mean tail cycles.

    Pearson correlation ignores scale, so a uniformly weakened response still
    scores 100 %.
    """
    curves = np.asarray(cycles, dtype=float)
    if curves.ndim != 2 or curves.shape[0] < head + tail:
        raise ValueError(f"need at least {head + tail} cycles on a common grid")
    first = curves[:head].mean(axis=0)
    last = curves[-tail:].mean(axis=0)
    if np.ptp(first) == 0 or np.ptp(last) == 0:
        raise ValueError("correlation undefined for a constant curve")
    return float(np.corrcoef(first, last)[0, 1] * 100.0)


@dataclass(frozen=True)
class Metrics:
    effective_stiffness: float  # N/mm
    operational_force_range: float  # N
    sensitivity: float  # uH/N
    hysteresis: float  # percent

    def to_dict(self) -> dict:
        return {
            "effective_stiffness_n_per_mm": self.effective_stiffness,
            "operational_force_range_n": self.operational_force_range,
            "sensitivity_uh_per_n": self.sensitivity,
            "hysteresis_pct": self.hysteresis,
        }


def characterize(
    force: TimedStream,
    inductance: TimedStream,
    channel: int | None = None,
    stroke: float = DENSIFICATION_MM,
) -> Metrics:
    """Compute stiffness, force range, sensitivity and hysteresis of one cycle.

    ``force`` holds columns (force N, displacement mm); ``inductance`` holds
    the 16 coil channels and is paired to the force samples by nearest
    timestamp. The active channel defaults to the one with the largest
    response.
    """
    if force.values.shape[1] < 2:
        raise ValueError("force stream needs force and displacement columns")
    synced = nearest_neighbor_sync(force, inductance)
    f = synced.a[:, 0]
    d = synced.a[:, 1]
    if channel is None:
        channel = int(np.argmax(synced.b.max(axis=0)))
    dl = synced.b[:, channel]

    peak = int(np.argmax(d))
    d_peak = float(d[peak])
    if d_peak <= 0 or peak == 0 or peak == d.size - 1:
        raise IncompleteCycleError("cycle has no loading and unloading branch")
    if d_peak < stroke - 1e-9:
        raise IncompleteCycleError(f"cycle peak {d_peak:.3g} mm short of the {stroke} mm stroke")
    if d[-1] > 0.01 * d_peak:
        raise IncompleteCycleError("unloading branch does not return to zero")

    d_up, f_up, l_up = d[: peak + 1], f[: peak + 1], dl[: peak + 1]
    d_dn, f_dn = d[peak:][::-1], f[peak:][::-1]

    k0 = effective_stiffness(d_up, f_up, LINEAR_LIMIT_MM)
    f_op = float(np.interp(stroke, d_up, f_up))
    l_op = float(np.interp(stroke, d_up, l_up))
    # mean of dL/dF over [0, f_op] is the secant slope
    sensitivity = (l_op - float(l_up[0])) / (f_op - float(f_up[0]))
    f_dn_on_grid = np.interp(d_up, d_dn, f_dn)
    hyst = hysteresis_metric((d_up, f_up), (d_up, f_dn_on_grid))
    return Metrics(k0, f_op, sensitivity, hyst)
