"""Tile geometry: the 4x4 coil grid, stiffness maps, and footprint splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice_mechanics import REFERENCE_CELL_SIZE, density_violations

ROWS = 4
COLS = 4
PITCH_MM = 37.5
COIL_SIDE_MM = 25.0


@dataclass(frozen=True)
class CoilArraySpec:
    """Regular coil grid. Cell ``(i, j)`` is row ``i`` (y) and column ``j`` (x)."""

    rows: int = ROWS
    cols: int = COLS
    pitch: float = PITCH_MM
    coil_side: float = COIL_SIDE_MM

    @property
    def span(self) -> tuple[float, float]:
        """Tile extent as (x, y) in mm."""
        return self.cols * self.pitch, self.rows * self.pitch

    @property
    def n_channels(self) -> int:
        return self.rows * self.cols

    def center(self, cell: tuple[int, int]) -> tuple[float, float]:
        i, j = cell
        return (j + 0.5) * self.pitch, (i + 0.5) * self.pitch

    def centers(self) -> np.ndarray:
        """Coil centers, shape (rows, cols, 2) with x then y."""
        j, i = np.meshgrid(np.arange(self.cols), np.arange(self.rows))
        return np.stack([(j + 0.5) * self.pitch, (i + 0.5) * self.pitch], axis=-1)

    def contains(self, x: float, y: float) -> bool:
        sx, sy = self.span
        return 0.0 <= x <= sx and 0.0 <= y <= sy

    def cell_at(self, x: float, y: float) -> tuple[int, int] | None:
        if not self.contains(x, y):
            return None
        j = min(int(x // self.pitch), self.cols - 1)
        i = min(int(y // self.pitch), self.rows - 1)
        return i, j

    def channel_names(self) -> list[str]:
        return [f"c{i}{j}" for i in range(self.rows) for j in range(self.cols)]

    def cells(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.rows) for j in range(self.cols)]


@dataclass(frozen=True)
class StiffnessMap:
    """Relative density per cell on the coil grid."""

    densities: tuple[tuple[float, ...], ...]
    cell_size: float = REFERENCE_CELL_SIZE

    def __post_init__(self):
        rows = tuple(tuple(float(v) for v in row) for row in self.densities)
        object.__setattr__(self, "densities", rows)
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        shape = (len(self.densities), *{len(r) for r in self.densities})
        if shape != (ROWS, COLS):
            out.append(f"map must be {ROWS}x{COLS}, got rows of lengths {[len(r) for r in self.densities]}")
            return out
        for i, row in enumerate(self.densities):
            for j, rho in enumerate(row):
                out.extend(f"cell ({i},{j}): {msg}" for msg in density_violations(rho))
        return out

    @classmethod
    def from_array(cls, values, cell_size: float = REFERENCE_CELL_SIZE) -> "StiffnessMap":
        return cls(tuple(tuple(row) for row in np.asarray(values, dtype=float).tolist()), cell_size)

    @classmethod
    def uniform(cls, rho: float) -> "StiffnessMap":
        return cls(tuple((rho,) * COLS for _ in range(ROWS)))

    @classmethod
    def split(cls, upstream: float, downstream: float, boundary: int, axis: str = "x") -> "StiffnessMap":
        """Two-region map: columns (axis x) or rows (axis y) before ``boundary`` get ``upstream``."""
        grid = np.full((ROWS, COLS), downstream, dtype=float)
        if axis == "x":
            grid[:, :boundary] = upstream
        else:
            grid[:boundary, :] = upstream
        return cls.from_array(grid)

    @classmethod
    def column_bands(cls, per_column: Sequence[float]) -> "StiffnessMap":
        return cls(tuple(tuple(per_column) for _ in range(ROWS)))

    def as_array(self) -> np.ndarray:
        return np.array(self.densities, dtype=float)

    def at(self, cell: tuple[int, int]) -> float:
        return self.densities[cell[0]][cell[1]]

    def key(self) -> tuple[float, ...]:
        """Row-major flat tuple; used for lexicographic ordering."""
        return tuple(v for row in self.densities for v in row)

    def distinct(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.key())))


# ---------------------------------------------------------------------------
# Disc/rectangle overlap
# ---------------------------------------------------------------------------


def _chord_integral(x: float, r: float) -> float:
    # antiderivative of sqrt(r^2 - x^2)
    x = min(max(x, -r), r)
    return 0.5 * (x * math.sqrt(max(r * r - x * x, 0.0)) + r * r * math.asin(x / r))


def _disc_lower_left(a: float, b: float, r: float) -> float:
    """Area of the origin-centred disc of radius r with x <= a and y <= b."""
    a = min(max(a, -r), r)
    if a <= -r or b <= -r:
        return 0.0
    if b >= r:
        return 2.0 * (_chord_integral(a, r) - _chord_integral(-r, r))

    xb = math.sqrt(r * r - b * b)

    def part(lo: float, hi: float, full: bool) -> float:
        hi = min(hi, a)
        if hi <= lo:
            return 0.0
        if full:
            return 2.0 * (_chord_integral(hi, r) - _chord_integral(lo, r))
        return 0.0

    total = part(-r, -xb, b > 0) + part(xb, r, b > 0)
    lo, hi = -xb, min(xb, a)
    if hi > lo:
        total += b * (hi - lo) + _chord_integral(hi, r) - _chord_integral(lo, r)
    return total


def disc_rect_overlap(cx: float, cy: float, r: float, x0: float, x1: float, y0: float, y1: float) -> float:
    """Exact area of a disc intersected with an axis-aligned rectangle."""
    if r <= 0 or x1 <= x0 or y1 <= y0:
        return 0.0
    f = lambda a, b: _disc_lower_left(a - cx, b - cy, r)  # noqa: E731
    return max(f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0), 0.0)


def footprint_fractions(array: CoilArraySpec, x: float, y: float, radius: float = 0.0) -> np.ndarray:
    """Share of the object's normal load carried by each cell.

    A point footprint (radius 0) loads the cell under the center. A disc is
    split by area overlap, normalised over the part of the disc on the tile.
    """
    out = np.zeros((array.rows, array.cols))
    if radius <= 0:
        cell = array.cell_at(x, y)
        if cell is not None:
            out[cell] = 1.0
        return out
    p = array.pitch
    for i, j in array.cells():
        out[i, j] = disc_rect_overlap(x, y, radius, j * p, (j + 1) * p, i * p, (i + 1) * p)
    total = out.sum()
    if not total > 0:
        # radius too small for the area to register
        return footprint_fractions(array, x, y, 0.0)
    return out / total

