"""Search over stiffness layouts for passive guidance goals.

The simulator is the only model of the objective: every candidate map is
scored by running the scenario template on it. Small constrained spaces are
enumerated; larger ones use greedy single-cell flips with fixed restarts.
"""

from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .calibration import SystemCalibration
from .surface_dynamics import G_MM, Scenario, SimulationResult, min_initiation_tilt, simulate
from .tile import COLS, ROWS, CoilArraySpec, StiffnessMap

CALIBRATED_DENSITIES = (0.07, 0.10, 0.20)
GOAL_KINDS = ("stop_in_cell", "max_exit_speed", "corridor")


class InfeasibleSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class GuidanceGoal:
    kind: str
    cell: tuple[int, int] | None = None
    limit: float | None = None  # mm/s, for max_exit_speed
    cells: tuple[tuple[int, int], ...] = ()  # corridor
    weight: float = 1.0
    effort_weight: float = 0.0  # cost per degree of initiation tilt

    def __post_init__(self):
        if self.cell is not None:
            object.__setattr__(self, "cell", tuple(self.cell))
        object.__setattr__(self, "cells", tuple(tuple(c) for c in self.cells))
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if self.kind not in GOAL_KINDS:
            out.append(f"goal kind must be one of {GOAL_KINDS}, got {self.kind!r}")
        if self.kind == "stop_in_cell" and self.cell is None:
            out.append("stop_in_cell goal needs a cell")
        if self.kind == "max_exit_speed" and (self.limit is None or self.limit < 0):
            out.append("max_exit_speed goal needs a non-negative limit")
        if self.kind == "corridor" and not self.cells:
            out.append("corridor goal needs at least one cell")
        for c in ([self.cell] if self.cell is not None else []) + list(self.cells):
            if not (len(c) == 2 and 0 <= c[0] < ROWS and 0 <= c[1] < COLS):
                out.append(f"cell {c} is not on the {ROWS}x{COLS} grid")
        if self.weight < 0 or self.effort_weight < 0:
            out.append("weights must be non-negative")
        return out


@dataclass(frozen=True)
class Evaluation:
    cost: float
    terms: dict = field(default_factory=dict)
    reason: str = ""
    result: SimulationResult | None = None


def is_contiguous(smap: StiffnessMap) -> bool:
    """True when each density value occupies one 4-connected region."""
    grid = smap.as_array()
    for value in smap.distinct():
        _, n = ndimage.label(grid == value)
        if n > 1:
            return False
    return True


def _projected_stop(result: SimulationResult, smap: StiffnessMap, calibration: SystemCalibration,
                    array: CoilArraySpec) -> tuple[float, float]:
    # where a still-moving object would come to rest under the last cell's resistance
    st = result.final
    if st.speed == 0:
        return st.x, st.y
    x = min(max(st.x, 0.0), array.span[0])
    y = min(max(st.y, 0.0), array.span[1])
    mu = float(calibration.friction.mu_k(smap.at(array.cell_at(x, y))))
    coast = st.speed**2 / (2.0 * G_MM * mu)
    return st.x + coast * st.vx / st.speed, st.y + coast * st.vy / st.speed


def _distance_to_cells(x: float, y: float, cells, array: CoilArraySpec) -> float:
    p = array.pitch
    best = math.inf
    for i, j in cells:
        dx = max(j * p - x, 0.0, x - (j + 1) * p)
        dy = max(i * p - y, 0.0, y - (i + 1) * p)
        best = min(best, math.hypot(dx, dy))
    return best


def assess(
    candidate: StiffnessMap,
    template: Scenario,
    goal: GuidanceGoal,
    calibration: SystemCalibration,
    array: CoilArraySpec = CoilArraySpec(),
) -> Evaluation:
    """Run the template on ``candidate`` and break the cost into its terms."""
    scenario = replace(template, smap=candidate)
    cal = calibration
    result = simulate(scenario, cal.lattice, cal.gap, cal.friction, array)
    if result.termination == "densification":
        return Evaluation(math.inf, {}, result.message, result)

    terms = {}
    if goal.kind == "stop_in_cell":
        sx, sy = _projected_stop(result, candidate, cal, array)
        cx, cy = array.center(goal.cell)
        terms["stop"] = math.hypot(sx - cx, sy - cy)
    elif goal.kind == "max_exit_speed":
        exit_speed = result.final.speed if result.termination == "off_edge" else 0.0
        terms["exit_speed"] = max(0.0, exit_speed - goal.limit)
    else:
        tr = result.trajectory
        dt = 1.0 / scenario.frame_hz
        terms["corridor"] = sum(
            _distance_to_cells(float(x), float(y), goal.cells, array) * dt for x, y in zip(tr.x, tr.y)
        )
    terms["effort"] = min_initiation_tilt(candidate, cal.friction, (scenario.initial.x, scenario.initial.y), array)
    cost = goal.weight * sum(v for k, v in terms.items() if k != "effort") + goal.effort_weight * terms["effort"]
    return Evaluation(cost, terms, "", result)


def evaluate(candidate: StiffnessMap, template: Scenario, goal: GuidanceGoal, calibration: SystemCalibration) -> float:
    """Scalar cost of a candidate map (lower is better; inf on densification)."""
    return assess(candidate, template, goal, calibration).cost


def tilt_threshold_profile(smap: StiffnessMap, calibration: SystemCalibration,
                           array: CoilArraySpec = CoilArraySpec()) -> np.ndarray:
    """Initiation tilt (deg) of each cell."""
    out = np.empty((array.rows, array.cols))
    for cell in array.cells():
        out[cell] = math.degrees(math.atan(float(calibration.friction.mu_s(smap.at(cell)))))
    return out


# ---------------------------------------------------------------------------
# Candidate spaces
# ---------------------------------------------------------------------------


def split_candidates(densities: Sequence[float] = CALIBRATED_DENSITIES, boundaries: Sequence[int] = (1, 2, 3),
                     axis: str = "x") -> list[StiffnessMap]:
    """Distinct two-region maps, upstream density before the boundary."""
    seen, out = set(), []
    for up, down, b in itertools.product(densities, densities, boundaries):
        m = StiffnessMap.split(up, down, b, axis)
        if m.key() not in seen:
            seen.add(m.key())
            out.append(m)
    return out


def band_candidates(densities: Sequence[float] = CALIBRATED_DENSITIES) -> list[StiffnessMap]:
    """Every map whose density varies only by column (len(densities)**4 maps)."""
    return [StiffnessMap.column_bands(c) for c in itertools.product(densities, repeat=COLS)]


SPACES: dict[str, Callable[..., list[StiffnessMap]]] = {
    "split": split_candidates,
    "bands": band_candidates,
}


@dataclass(frozen=True)
class OptimizationResult:
    best: StiffnessMap
    cost: float
    trace: tuple[tuple[int, float], ...]
    exhaustive: bool
    evaluation: Evaluation | None = None

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def _better(a: tuple[float, tuple], b: tuple[float, tuple] | None) -> bool:
    return b is None or a < b


def optimize(
    goal: GuidanceGoal,
    template: Scenario,
    calibration: SystemCalibration,
    budget: int,
    candidates: Sequence[StiffnessMap] | None = None,
    space: str = "bands",
    contiguous: bool = False,
    densities: Sequence[float] = CALIBRATED_DENSITIES,
    seed: int = 0,
    restarts: int = 3,
    workers: int = 1,
) -> OptimizationResult:
    """Find the lowest-cost stiffness map.

    When the feasible candidate set fits in ``budget`` every candidate is
    evaluated. Otherwise a greedy single-cell-flip search over the full grid
    runs from uniform maps, then from ``restarts`` seeded random maps. Ties on
    cost go to the lexicographically smaller map, so the answer does not
    depend on evaluation order.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if candidates is not None:
        pool = list(candidates)
    elif space in SPACES:
        pool = SPACES[space](densities)
    else:
        raise ValueError(f"unknown candidate space {space!r}; choose from {sorted(SPACES)}")
    feasible = [m for m in pool if not contiguous or is_contiguous(m)]
    if not feasible:
        raise InfeasibleSpaceError("no candidate satisfies the constraints")

    def score(maps: list[StiffnessMap]) -> list[float]:
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                return list(ex.map(lambda m: evaluate(m, template, goal, calibration), maps))
        return [evaluate(m, template, goal, calibration) for m in maps]

    if len(feasible) <= budget:
        costs = score(feasible)
        trace = tuple(enumerate(costs))
        best_cost, _, best = min(((c, m.key(), m) for c, m in zip(costs, feasible)), key=lambda r: r[:2])
        return OptimizationResult(best, best_cost, trace, True, assess(best, template, goal, calibration))

    return _local_search(goal, template, calibration, budget, contiguous, sorted(densities), seed, restarts)


def _local_search(goal, template, calibration, budget, contiguous, densities, seed, restarts) -> OptimizationResult:
    rng = random.Random(seed)
    cache: dict[tuple, float] = {}
    trace: list[tuple[int, float]] = []

    def cost_of(m: StiffnessMap) -> float | None:
        key = m.key()
        if key not in cache:
            if len(trace) >= budget:
                return None
            cache[key] = evaluate(m, template, goal, calibration)
            trace.append((len(trace), cache[key]))
        return cache[key]

    starts = [StiffnessMap.uniform(d) for d in densities]
    starts += [
        StiffnessMap.from_array(np.array([rng.choice(densities) for _ in range(ROWS * COLS)]).reshape(ROWS, COLS))
        for _ in range(restarts)
    ]
    incumbent: tuple[float, tuple] | None = None
    best_map = None
    for start in starts:
        if contiguous and not is_contiguous(start):
            continue
        cur_cost = cost_of(start)
        if cur_cost is None:
            break
        cur = start
        while True:
            step_best: tuple[float, tuple] | None = None
            step_map = None
            flat = list(cur.key())
            exhausted = False
            for idx in range(ROWS * COLS):
                for d in densities:
                    if d == flat[idx]:
                        continue
                    nb_vals = flat.copy()
                    nb_vals[idx] = d
                    nb = StiffnessMap.from_array(np.array(nb_vals).reshape(ROWS, COLS))
                    if contiguous and not is_contiguous(nb):
                        continue
                    c = cost_of(nb)
                    if c is None:
                        exhausted = True
                        break
                    if _better((c, nb.key()), step_best):
                        step_best, step_map = (c, nb.key()), nb
                if exhausted:
                    break
            if step_best is not None and step_best < (cur_cost, cur.key()):
                cur, cur_cost = step_map, step_best[0]
            if exhausted or step_best is None or cur is not step_map:
                break
        if _better((cur_cost, cur.key()), incumbent):
            incumbent, best_map = (cur_cost, cur.key()), cur
        if len(trace) >= budget:
            break
    if best_map is None:
        raise InfeasibleSpaceError("no feasible start map within budget")
    return OptimizationResult(best_map, incumbent[0], tuple(trace), False, assess(best_map, template, goal, calibration))
