"""Command-line entry point: ``copess <command> ...``.

Exit status is 0 on success, 1 for invalid input, 2 for runtime failures and
64 for an unknown command.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .calibration import SystemCalibration, load_calibration
from .guidance_optimizer import optimize
from .inductive_sensing import (
    read_force_csv,
    read_frames_csv,
    simulate_indentation_cycle,
    write_force_csv,
    write_frames_csv,
)
from .lattice_mechanics import CalibrationError, density_violations
from .scenario_io import (
    RunManifest,
    ScenarioParseError,
    ScenarioValidationError,
    load_scenario,
    write_json,
    write_manifest,
)
from .sensing_pipeline import IncompleteCycleError, TimedStream, characterize, localize_track, write_track_csv
from .surface_dynamics import ObjectSpec, ObjectState, Scenario, TiltSchedule, simulate
from .tile import StiffnessMap

log = logging.getLogger("copess")

OUT_ENV = "COPESS_OUT"
EX_USAGE = 64
COMMANDS = ("calibrate", "simulate", "metrics", "localize", "optimize", "sweep")


class InputError(ValueError):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV, "copess_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _calibration(args) -> SystemCalibration:
    return load_calibration(args.calibration, args.motion, args.v0)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_calibrate(args) -> int:
    cal = _calibration(args)
    out = _out_dir(args)
    fr = cal.friction
    laws = cal.lattice.to_dict()
    laws["gap_slopes_uh_per_mm"] = dict(zip(map(str, cal.gap.slopes.densities), cal.gap.slopes.values))
    laws["friction"] = {
        "static": dict(zip(map(str, fr.static.densities), fr.static.values)),
        "kinetic_ratio": fr.kinetic_ratio,
        "v0_mm_s": fr.v0,
        "stopping_residuals": list(fr.stopping_residuals),
    }
    write_json(out / "laws.json", laws)
    write_manifest(out, RunManifest("calibrate", None, cal.source, args.seed, ("laws.json",)))
    print(json.dumps(laws["laws"], indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    cal = _calibration(args)
    if args.cycle is not None:
        if args.scenario:
            raise InputError("give either a scenario file or --cycle, not both")
        problems = density_violations(args.cycle)
        if problems:
            raise InputError("; ".join(problems))
        cycle = simulate_indentation_cycle(cal.lattice, cal.gap, args.cycle)
        out = _out_dir(args)
        write_force_csv(out / "force.csv", cycle.t, cycle.force, cycle.displacement)
        write_frames_csv(out / "frames.csv", cycle.frames)
        write_manifest(out, RunManifest("simulate --cycle", None, cal.source, args.seed, ("force.csv", "frames.csv")))
        return 0
    if not args.scenario:
        raise InputError("simulate needs a scenario file or --cycle RHO")
    loaded = load_scenario(args.scenario)
    result = simulate(loaded.scenario, cal.lattice, cal.gap, cal.friction)
    out = _out_dir(args)
    result.trajectory.to_csv(out / "trajectory.csv")
    write_frames_csv(out / "frames.csv", result.frames)
    write_json(out / "scenario.json", loaded.document)
    write_manifest(
        out,
        RunManifest("simulate", loaded.digest, cal.source, loaded.scenario.seed,
                    ("trajectory.csv", "frames.csv", "scenario.json")),
    )
    print(f"{result.termination}: travel {result.travel:.2f} mm {result.message}".rstrip())
    return 0


def cmd_metrics(args) -> int:
    frames = read_frames_csv(args.frames)
    force = read_force_csv(args.force)
    if "disp_mm" not in force:
        raise InputError("force CSV needs a disp_mm column to compute stiffness")
    fstream = TimedStream(force["t_s"], np.column_stack([force["force_n"], force["disp_mm"]]))
    metrics = characterize(fstream, TimedStream.from_frames(frames), channel=args.channel).to_dict()
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        write_json(out / "metrics.json", metrics)
        write_manifest(out, RunManifest("metrics", None, "n/a", args.seed, ("metrics.json",)))
    print(text)
    return 0


def cmd_localize(args) -> int:
    frames = read_frames_csv(args.frames)
    track = localize_track(frames, noise_floor=args.noise_floor)
    out = _out_dir(args)
    write_track_csv(out / "track.csv", track)
    write_manifest(out, RunManifest("localize", None, "n/a", args.seed, ("track.csv",)))
    return 0


def cmd_optimize(args) -> int:
    cal = _calibration(args)
    loaded = load_scenario(args.scenario)
    if loaded.goal is None:
        raise InputError("scenario has no 'goal' section")
    res = optimize(
        loaded.goal, loaded.scenario, cal, args.budget, space=args.space,
        contiguous=args.contiguous, seed=args.seed, workers=args.workers,
    )
    out = _out_dir(args)
    write_json(out / "best_map.json", {"map": [list(r) for r in res.best.densities], "cost": res.cost,
                                       "exhaustive": res.exhaustive})
    with open(out / "cost_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eval_idx", "cost"])
        w.writerows([i, repr(c)] for i, c in res.trace)
    res.evaluation.result.trajectory.to_csv(out / "trajectory.csv")
    write_manifest(out, RunManifest("optimize", loaded.digest, cal.source, args.seed,
                                    ("best_map.json", "cost_trace.csv", "trajectory.csv")))
    print(json.dumps({"map": [list(r) for r in res.best.densities], "cost": res.cost}))
    return 0


def cmd_sweep(args) -> int:
    cal = _calibration(args)
    densities = _floats(args.densities)
    tilts = _floats(args.tilts)
    v0 = cal.friction.v0 if args.impulse is None else args.impulse
    out = _out_dir(args)
    rows = []
    for rho in densities:
        for tilt in tilts:
            sc = Scenario(
                StiffnessMap.uniform(rho), ObjectSpec(args.mass), TiltSchedule.hold(tilt, rise_time=1e-3),
                ObjectState(0.0, 56.25, v0, 0.0), duration=args.duration,
            )
            res = simulate(sc, cal.lattice, cal.gap, cal.friction)
            rows.append([rho, tilt, res.termination, round(res.travel, 6), round(res.final.speed, 6)])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["density", "tilt_deg", "termination", "travel_mm", "final_speed_mm_s"])
        w.writerows(rows)
    write_manifest(out, RunManifest("sweep", None, cal.source, args.seed, ("sweep.csv",)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--calibration", help="anchor CSV replacing the built-in table")
    common.add_argument("--motion", help="motion-anchor JSON replacing the built-in tilts/stopping distances")
    common.add_argument("--v0", type=float, help="impulse speed (mm/s); the kinetic ratio is then fitted")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./copess_out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="copess", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("calibrate", parents=[common], help="fit density laws from anchors")

    p = sub.add_parser("simulate", parents=[common], help="run a scenario or an indentation cycle")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--cycle", type=float, metavar="RHO", help="simulate a 6 mm indentation cycle instead")

    p = sub.add_parser("metrics", parents=[common], help="stiffness/range/sensitivity/hysteresis from cycle logs")
    p.add_argument("--frames", required=True)
    p.add_argument("--force", required=True)
    p.add_argument("--channel", type=int)

    p = sub.add_parser("localize", parents=[common], help="frames to position track")
    p.add_argument("--frames", required=True)
    p.add_argument("--noise-floor", type=float, default=0.5)

    p = sub.add_parser("optimize", parents=[common], help="search stiffness maps for the scenario goal")
    p.add_argument("scenario")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--space", choices=("bands", "split"), default="bands")
    p.add_argument("--contiguous", action="store_true")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="stopping distance over a density/tilt grid")
    p.add_argument("--densities", default="0.07,0.10,0.20")
    p.add_argument("--tilts", default="0")
    p.add_argument("--impulse", type=float, help="initial speed (mm/s); default is the calibrated impulse")
    p.add_argument("--mass", type=float, default=0.1)
    p.add_argument("--duration", type=float, default=3.0)
    return parser


HANDLERS = {
    "calibrate": cmd_calibrate,
    "simulate": cmd_simulate,
    "metrics": cmd_metrics,
    "localize": cmd_localize,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    command = next((a for a in argv if not a.startswith("-")), None)
    if command is None and any(a in ("-h", "--help") for a in argv):
        parser.parse_args(argv)
    if command not in COMMANDS:
        parser.print_usage(sys.stderr)
        print(f"copess: unknown command {command!r}; choose from {', '.join(COMMANDS)}", file=sys.stderr)
        return EX_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return HANDLERS[args.command](args)
    except (ScenarioParseError, ScenarioValidationError, InputError, CalibrationError, IncompleteCycleError,
            FileNotFoundError) as exc:
        print(f"copess: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"copess: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
