"""``driftkit`` command line.

Exit codes: 0 success, 2 bad flags or input, 3 numerical failure
(divergent simulation, degenerate density), 4 too many failed replications.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import os
import sys
from pathlib import Path

import numpy as np

from driftkit import __version__
from driftkit import io
from driftkit.bandwidth import BandwidthGrid, select_bandwidth
from driftkit.errors import (
    DegenerateDensityError,
    DegenerateWeightsError,
    ExperimentFailedError,
    InsufficientPathsError,
    SelectionFailedError,
    SimulationDivergedError,
)
from driftkit.estimators import (
    FloorSpec,
    estimate_bf,
    estimate_density,
    estimate_drift_2b,
    quantile_grid,
)
from driftkit.experiments import ExperimentConfig, run_all_models, table1_experiment
from driftkit.kernel import GAUSSIAN
from driftkit.sde import ObservationGrid, make_preset, simulate_ensemble

log = logging.getLogger("driftkit")

EXIT_USAGE, EXIT_NUMERIC, EXIT_POLICY = 2, 3, 4


class UsageError(Exception):
    pass


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the manifest timestamp for reproducible output
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc))
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def _companion(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _write_manifest(out: Path, command: str, config: dict, artifacts: list[Path]) -> Path:
    manifest = _companion(out, ".manifest.json")
    io.write_json(manifest, {
        "command": command,
        "config": config,
        "artifacts": [str(p) for p in artifacts],
        "version": __version__,
        "timestamp": _timestamp(),
    })
    return manifest


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a {kind.__name__}: {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative: {text!r}")
    return v


def _floor(text):
    try:
        return FloorSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(text):
    try:
        return BandwidthGrid.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_simulate(args) -> int:
    grid = ObservationGrid(args.t0, args.T, args.n)
    model = make_preset(args.model, x0=args.x0)
    ens = simulate_ensemble(model, args.N, grid, args.substeps, args.seed)
    out = Path(args.output)
    io.write_ensemble_csv(ens, out)
    env = io.write_json(_companion(out, ".json"), io.ensemble_envelope(ens))
    _write_manifest(out, "simulate", vars_of(args), [out, env])
    return 0


def _load(path):
    try:
        return io.read_ensemble_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read ensemble: {exc}") from None


def cmd_estimate(args) -> int:
    ens = _load(args.input)
    if args.eta is not None and args.kind != "drift":
        raise UsageError("--eta only applies to --kind drift")
    if args.grid_rule == "quantile":
        xs = quantile_grid(ens, args.quantile, args.points)
        rule = f"quantile q={args.quantile}, G={args.points}"
    else:
        pad = 5.0 * max(args.h, args.eta or args.h)
        xs = np.linspace(ens.states.min() - pad, ens.states.max() + pad, args.points)
        rule = f"span: data range +/- 5h, G={args.points}"
    if args.kind == "density":
        curve = estimate_density(ens, GAUSSIAN, args.h, xs)
    elif args.kind == "bf":
        curve = estimate_bf(ens, GAUSSIAN, args.h, xs)
    else:
        eta = args.h if args.eta is None else args.eta
        curve = estimate_drift_2b(ens, GAUSSIAN, args.h, eta, xs, args.floor)
    out = Path(args.output)
    io.write_curve_csv(curve, out)
    meta = io.write_json(_companion(out, ".json"), {**io.curve_metadata(curve), "grid_rule": rule,
                                                     "input": str(args.input)})
    _write_manifest(out, "estimate", vars_of(args), [out, meta])
    return 0


def cmd_cv(args) -> int:
    ens = _load(args.input)
    if ens.N < 2:
        raise UsageError(f"cross-validation needs at least 2 paths, input has {ens.N}")
    report = select_bandwidth(ens, GAUSSIAN, args.grid, args.renormalized)
    out = Path(args.output)
    io.write_cv_csv(report, out)
    meta = io.write_json(_companion(out, ".json"), report.as_dict())
    _write_manifest(out, "cv", vars_of(args), [out, meta])
    return 0


def cmd_experiment(args) -> int:
    if args.all == (args.model is not None):
        raise UsageError("give exactly one of --model or --all")
    base = ExperimentConfig(
        model_id=args.model or 1, N=args.N, n=args.n, T=args.T, t0=args.t0, x0=args.x0,
        bandwidth_grid=args.grid, replications=args.reps, substeps=args.substeps,
        base_seed=args.seed, floor=args.floor, renormalized=args.renormalized,
        eval_quantile=args.quantile, eval_points=args.points,
    )
    if args.all:
        if args.grid is not None:
            raise UsageError("--grid cannot be combined with --all (each model uses its own grid)")
        summaries = run_all_models(base)
    else:
        summaries = {args.model: table1_experiment(base)}
    out = Path(args.output)
    io.write_table1_csv(summaries, out)
    payload = {f"model_{k}": s.as_dict() for k, s in summaries.items()}
    warnings = [f"model {k}: single replication, std reported as 0"
                for k, s in summaries.items() if not s.std_defined]
    payload["warnings"] = warnings
    for w in warnings:
        log.warning(w)
    js = io.write_json(_companion(out, ".json"), payload)
    _write_manifest(out, "experiment", vars_of(args), [out, js])
    return 0


def vars_of(args) -> dict:
    skip = {"func", "verbose"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, FloorSpec):
            v = v.as_dict()
        elif isinstance(v, BandwidthGrid):
            v = list(v.hs)
        out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="driftkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"driftkit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common_sim(sp):
        sp.add_argument("--N", type=_positive(int), default=50, help="number of paths")
        sp.add_argument("--n", type=_positive(int), default=50, help="observation increments")
        sp.add_argument("--T", type=_positive(float), default=5.0, help="horizon")
        sp.add_argument("--t0", type=_nonneg_float, default=1.0, help="first observation time")
        sp.add_argument("--x0", type=float, default=2.0, help="initial condition")
        sp.add_argument("--substeps", type=_positive(int), default=10,
                        help="Euler steps per observation interval")
        sp.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="simulate a preset model and write paths as CSV")
    s.add_argument("--model", type=int, choices=[1, 2, 3, 4], required=True)
    common_sim(s)
    s.add_argument("-o", "--output", default="paths.csv")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="evaluate an estimator on paths from CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--h", type=_positive(float), required=True)
    e.add_argument("--eta", type=_positive(float), default=None,
                   help="denominator bandwidth (two-bandwidth drift estimator)")
    e.add_argument("--kind", choices=["density", "bf", "drift"], default="drift")
    e.add_argument("--floor", type=_floor, default=FloorSpec.data_driven(),
                   help="abs:<m> or data:<fraction> (default data:0.01)")
    e.add_argument("--grid-rule", choices=["quantile", "span"], default="quantile")
    e.add_argument("--quantile", type=float, default=0.05)
    e.add_argument("--points", type=_positive(int), default=200)
    e.add_argument("-o", "--output", default="curve.csv")
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("cv", help="cross-validation criterion over a bandwidth grid")
    c.add_argument("--input", required=True)
    c.add_argument("--grid", type=_grid, default=BandwidthGrid.parse("0.02:0.02:10"),
                   help='"start:step:count" or comma list (default 0.02:0.02:10)')
    c.add_argument("--renormalized", action="store_true",
                   help="drop the held-out path from the weight denominator too")
    c.add_argument("-o", "--output", default="cv.csv")
    c.set_defaults(func=cmd_cv)

    x = sub.add_parser("experiment", help="replicated MSE study (Table-1 style)")
    x.add_argument("--model", type=int, choices=[1, 2, 3, 4])
    x.add_argument("--all", action="store_true", help="run all four models")
    x.add_argument("--reps", type=_positive(int), default=10)
    common_sim(x)
    x.add_argument("--grid", type=_grid, default=None,
                   help="bandwidth grid (default 0.02:0.02:10 for models 1-2, 0.01:0.01:10 for 3-4)")
    x.add_argument("--floor", type=_floor, default=FloorSpec.data_driven())
    x.add_argument("--renormalized", action="store_true")
    x.add_argument("--quantile", type=float, default=0.05)
    x.add_argument("--points", type=_positive(int), default=200)
    x.add_argument("-o", "--output", default="experiment.csv")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, InsufficientPathsError) as exc:
        print(f"driftkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"driftkit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimulationDivergedError, DegenerateDensityError, DegenerateWeightsError,
            SelectionFailedError) as exc:
        print(f"driftkit {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ExperimentFailedError as exc:
        print(f"driftkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_POLICY


if __name__ == "__main__":
    sys.exit(main())
