"""Command-line entry points.

Subcommands: segment, variance, simulate, benchmark, profile.  Exit codes are
part of the contract: 0 success, 2 bad flags (argparse), 3 unreadable or
non-numeric input, 4 invalid configuration, 5 guard violations (infeasible or
degenerate problems).  All numeric JSON output keeps full double precision.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from . import simulation as sim
from .constraints import MODES, ConstraintSpec
from .core import ConfigError, GuardError, ParseError, StateGrid
from .dp import SolverConfig, slope_op_fixed_k, solve, warm_up
from .pruning import STRATEGIES, PruningSpec
from .simulation import ExperimentReport, NoiseSpec, RunRecord, SignalSpec
from .variance import default_penalty, hall_diff_estimator, hall_estimator, mad_estimator

PAD = 10.0


# ---------------------------------------------------------------------------
# Input parsing


def read_series(path: str) -> np.ndarray:
    """One value per row, optional `value` header."""
    values = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            cell = row[0].strip()
            if lineno == 1 and cell.lower() == "value":
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: not a number: {cell!r}") from None
    if not values:
        raise ParseError(f"{path}: no numeric rows")
    return np.asarray(values, dtype=np.float64)


def read_profile(path: str):
    """Radial profile CSV with `distance_mm,intensity` columns."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "distance_mm" not in cols or "intensity" not in cols:
            raise ParseError(f"{path}: expected distance_mm,intensity columns, got {cols}")
        dist, inten = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                dist.append(float(row["distance_mm"]))
                inten.append(float(row["intensity"]))
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{lineno}: not a numeric profile row") from None
    if not dist:
        raise ParseError(f"{path}: no numeric rows")
    return np.asarray(dist), np.asarray(inten)


def parse_states(spec: str) -> StateGrid:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"states spec must be min:max:step, got {spec!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"states spec must be numeric, got {spec!r}") from None
    return StateGrid.from_range(lo, hi, step)


def _grid_from_args(args, values: np.ndarray) -> StateGrid:
    if args.states and args.states_file:
        raise ConfigError("give either --states or --states-file, not both")
    if args.states:
        return parse_states(args.states)
    if args.states_file:
        return StateGrid(np.sort(read_series(args.states_file)))
    return StateGrid.from_range(math.floor(values.min()) - PAD, math.ceil(values.max()) + PAD, 1.0)


def _constraint_from_args(args) -> ConstraintSpec:
    return ConstraintSpec(mode=args.constraint, min_angle_degrees=args.min_angle)


def _emit(doc, args) -> None:
    text = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_report(report: ExperimentReport, args) -> None:
    if args.format == "json":
        _emit(report.to_json(), args)
        return
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            report.to_csv(fh)
    else:
        report.to_csv(sys.stdout)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_segment(args) -> int:
    y = read_series(args.input)
    grid = _grid_from_args(args, y)
    constraint = _constraint_from_args(args)

    if args.fixed_k is not None:
        if args.beta is not None or args.beta_auto:
            raise ConfigError("--fixed-k replaces the penalty; drop --beta/--beta-auto")
        seg = slope_op_fixed_k(y, grid, args.fixed_k, constraint)
        beta = None
        pruning = "none"
        scanned = None
    else:
        if (args.beta is None) == (not args.beta_auto):
            raise ConfigError("give exactly one of --beta or --beta-auto")
        beta = args.beta if args.beta is not None else default_penalty(hall_diff_estimator(y), y.size)
        pruning = args.pruning or ("channel" if constraint.mode in ("none", "isotonic") else "none")
        seg, tables = solve(y, grid, SolverConfig(beta=beta, constraint=constraint,
                                                  pruning=PruningSpec(pruning)))
        scanned = tables.scanned_proportion

    doc = {
        "changepoints": [int(c) for c in seg.changepoints],
        "states": [float(s) for s in seg.states],
        "objective": seg.objective,
        "beta": beta,
        "constraint": {"mode": constraint.mode, "min_angle_degrees": constraint.min_angle_degrees}
                      if constraint.mode == "minangle" else {"mode": constraint.mode},
        "pruning": pruning,
        "scanned_proportion": scanned,
    }
    if args.format == "csv":
        fit = sim.reconstruct_signal(seg, y.size)
        fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
        try:
            writer = csv.writer(fh)
            writer.writerow(["t", "value"])
            for t, v in enumerate(fit, start=1):
                writer.writerow([t, repr(float(v))])
        finally:
            if args.out:
                fh.close()
    else:
        _emit(doc, args)
    return 0


def cmd_variance(args) -> int:
    y = read_series(args.input)
    hall = hall_estimator(y)
    hdiff = hall_diff_estimator(y)
    doc = {
        "n": int(y.size),
        "mad": mad_estimator(y),
        "hall": math.sqrt(hall),
        "hall_diff": math.sqrt(hdiff),
        "hall_variance": hall,
        "hall_diff_variance": hdiff,
        "default_beta": default_penalty(hdiff, y.size),
    }
    _emit(doc, args)
    return 0


def _signal_spec_from_args(args) -> SignalSpec:
    if args.kind == "scenario":
        return SignalSpec.scenario(args.n, args.index)
    if args.kind == "hat":
        return SignalSpec.hat(args.n, args.lo, args.hi)
    return SignalSpec.sinusoid(args.n, args.amplitude, args.period, args.offset)


def cmd_simulate(args) -> int:
    spec = _signal_spec_from_args(args)
    noise = NoiseSpec(family=args.family, sigma=args.sigma, df=args.df, seed=args.seed)
    y = sim.add_noise(sim.generate_signal(spec), noise)
    if args.format == "json":
        _emit({"values": [float(v) for v in y.values]}, args)
        return 0
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for v in y.values:
            writer.writerow([repr(float(v))])
    finally:
        if args.out:
            fh.close()
    return 0


def profile_density_scan(distance, intensity, steps=(1, 2, 4, 8), beta: float = 255.0,
                         replicates: int = 3, drop_mm: float = 3.5,
                         min_points: int = 5) -> ExperimentReport:
    """Wall time and first-changepoint location as the state grid coarsens."""
    warm_up()
    records = []
    first_cp = {}
    best_wall = {}
    run_id = 0
    for step in steps:
        for rep in range(replicates):
            t0 = time.perf_counter()
            doc = segment_profile(distance, intensity, beta=beta, step=float(step),
                                  drop_mm=drop_mm, min_points=min_points)
            wall = (time.perf_counter() - t0) * 1e3
            records.append(RunRecord(run_id, math.nan, beta, math.nan,
                                     len(doc["changepoints_mm"]), math.nan, wall, 0,
                                     "states-density", doc["n_used"], 0.0, f"step={step}"))
            run_id += 1
            first_cp[str(step)] = doc["r_inhib_mm"]
            best_wall[str(step)] = min(best_wall.get(str(step), math.inf), wall)
    report = ExperimentReport("states-density", records)
    report.meta["first_changepoint_mm"] = first_cp
    report.meta["min_wall_ms"] = best_wall
    return report


def segment_profile(distance, intensity, beta: float = 255.0, step: float = 1.0,
                    drop_mm: float = 3.5, min_points: int = 5,
                    grid: StateGrid | None = None) -> dict:
    """Isotonic fit of a radial intensity profile and the inhibition read-off.

    Points at or inside ``drop_mm`` belong to the pellet plateau and are
    discarded before fitting.  The first change-point's distance is the
    inhibition radius; a fit with no interior change falls back to the
    profile end and is flagged degenerate.
    """
    distance = np.asarray(distance, dtype=np.float64)
    intensity = np.asarray(intensity, dtype=np.float64)
    if distance.shape != intensity.shape or distance.ndim != 1:
        raise ConfigError("profile arrays must be one-dimensional and equally long")
    keep = distance > drop_mm
    dist, inten = distance[keep], intensity[keep]
    if dist.size < min_points:
        raise GuardError(f"profile has {dist.size} usable points; need at least {min_points}")
    if grid is None:
        grid = StateGrid.from_range(math.floor(inten.min()), math.ceil(inten.max()), step)
    cfg = SolverConfig(beta=beta, constraint=ConstraintSpec(mode="isotonic"),
                       pruning=PruningSpec("channel"))
    seg, tables = solve(inten, grid, cfg)
    cps_mm = [float(dist[c - 1]) for c in seg.changepoints]
    degenerate = seg.segment_count == 1
    r_inhib = cps_mm[0]
    return {
        "r_inhib_mm": r_inhib,
        "d_inhib_mm": 2.0 * r_inhib,
        "degenerate": degenerate,
        "changepoints_mm": cps_mm,
        "states": [float(s) for s in seg.states],
        "objective": seg.objective,
        "beta": beta,
        "n_used": int(dist.size),
        "scanned_proportion": tables.scanned_proportion,
    }


def cmd_profile(args) -> int:
    distance, intensity = read_profile(args.input)
    grid = parse_states(args.states) if args.states else None
    doc = segment_profile(distance, intensity, beta=args.beta, step=args.step,
                          drop_mm=args.drop_mm, min_points=args.min_points, grid=grid)
    _emit(doc, args)
    return 0


def _float_list(text: str):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}") from None


def cmd_benchmark(args) -> int:
    name = args.experiment
    if name == "penalty-scan":
        spec = SignalSpec.scenario(args.n, args.index)
        noise = NoiseSpec(family=args.family, sigma=args.sigma, df=args.df, seed=args.seed)
        k = round((args.b_max - args.b_min) / args.b_step)
        b_grid = [args.b_min + i * args.b_step for i in range(k + 1)]
        report = sim.penalty_scan(spec, noise, b_grid, args.replicates)
    elif name == "pruning-efficiency":
        spec = SignalSpec.hat(args.n, args.lo, args.hi)
        report = sim.pruning_efficiency_scan(spec, _float_list(args.sigmas),
                                             strategies=tuple(s for s in STRATEGIES if s != "none"),
                                             replicates=args.replicates, seed=args.seed)
    elif name == "timing":
        spec = SignalSpec.hat(100, args.lo, args.hi)
        n_grid = range(args.n_min, args.n_max + 1, args.n_step)
        noise = NoiseSpec(sigma=args.sigma, seed=args.seed)
        report = sim.timing_scan(spec, n_grid, noise, replicates=args.replicates)
    elif name == "robustness":
        spec = SignalSpec.scenario(args.n, 1)
        noise = NoiseSpec(family="student", sigma=args.sigma, df=args.df, seed=args.seed)
        unit = args.sigma**2 * math.log(args.n)
        k = round((args.b_max - args.b_min) / args.b_step)
        beta_grid = [(args.b_min + i * args.b_step) * unit for i in range(k + 1)]
        variants = {"none": ConstraintSpec(),
                    "minangle": ConstraintSpec(mode="minangle", min_angle_degrees=args.min_angle)}
        report = sim.robustness_scan(spec, noise, beta_grid, variants, replicates=args.replicates)
    elif name == "states-density":
        if args.input:
            distance, intensity = read_profile(args.input)
        else:
            distance, intensity = sim.ramp_profile()
        steps = [int(s) for s in _float_list(args.steps)]
        report = profile_density_scan(distance, intensity, steps=steps, beta=args.beta,
                                      replicates=args.replicates)
    else:  # pragma: no cover - argparse choices guard this
        raise ConfigError(f"unknown experiment {name!r}")
    _emit_report(report, args)
    return 0


# ---------------------------------------------------------------------------
# Argument wiring


def _add_output_flags(p, default_format="json"):
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=default_format)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slopeseg",
                                     description="Continuous change-in-slope segmentation on a state grid")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a series from a CSV file")
    p.add_argument("--input", required=True)
    p.add_argument("--states", help="grid as min:max:step (inclusive)")
    p.add_argument("--states-file", help="file with one state value per line")
    p.add_argument("--beta", type=float)
    p.add_argument("--beta-auto", action="store_true",
                   help="penalty 2*sigma^2*ln(n) with the difference-filter variance")
    p.add_argument("--constraint", choices=MODES, default="none")
    p.add_argument("--min-angle", type=float, default=130.0)
    p.add_argument("--pruning", choices=STRATEGIES)
    p.add_argument("--fixed-k", type=int, help="exact number of segments instead of a penalty")
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("variance", help="noise level estimates for a series")
    p.add_argument("--input", required=True)
    _add_output_flags(p)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("simulate", help="generate a noisy benchmark series")
    p.add_argument("--kind", choices=("scenario", "hat", "sinusoid"), default="scenario")
    p.add_argument("--index", type=int, default=1, help="scenario number 1..4")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--lo", type=float, default=10.0)
    p.add_argument("--hi", type=float, default=50.0)
    p.add_argument("--amplitude", type=float, default=20.0)
    p.add_argument("--period", type=float, default=50.0)
    p.add_argument("--offset", type=float, default=30.0)
    p.add_argument("--family", choices=("gaussian", "student"), default="gaussian")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--df", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    _add_output_flags(p, default_format="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="run a named experiment and write its report")
    p.add_argument("--experiment", required=True,
                   choices=("penalty-scan", "pruning-efficiency", "timing", "robustness", "states-density"))
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--index", type=int, default=1)
    p.add_argument("--lo", type=float, default=10.0)
    p.add_argument("--hi", type=float, default=50.0)
    p.add_argument("--family", choices=("gaussian", "student"), default="gaussian")
    p.add_argument("--sigma", type=float, default=12.0)
    p.add_argument("--sigmas", default="3,12,24", help="comma-separated noise levels")
    p.add_argument("--df", type=float, default=3.0)
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--b-min", type=float, default=0.1)
    p.add_argument("--b-max", type=float, default=5.0)
    p.add_argument("--b-step", type=float, default=0.1)
    p.add_argument("--n-min", type=int, default=100)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--n-step", type=int, default=100)
    p.add_argument("--min-angle", type=float, default=130.0)
    p.add_argument("--steps", default="1,2,4,8", help="state grid steps for states-density")
    p.add_argument("--beta", type=float, default=255.0, help="penalty for states-density")
    p.add_argument("--input", help="profile CSV for states-density (default: built-in ramp)")
    _add_output_flags(p, default_format="csv")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("profile", help="inhibition diameter from a radial intensity profile")
    p.add_argument("--input", required=True)
    p.add_argument("--states", help="grid as min:max:step (default: integer intensity range)")
    p.add_argument("--step", type=float, default=1.0, help="state grid step")
    p.add_argument("--beta", type=float, default=255.0)
    p.add_argument("--drop-mm", type=float, default=3.5)
    p.add_argument("--min-points", type=int, default=5)
    _add_output_flags(p)
    p.set_defaults(func=cmd_profile)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
