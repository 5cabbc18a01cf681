"""``conbandit`` command line: run, sweep, validate."""

from __future__ import annotations

import argparse
import sys

from .env import InfeasibleInstance, InvalidConfig
from .harness import ConfigError, load_config, run_experiment
from .validation import SUITES

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conbandit", description="Constrained bandits under corrupted constraints.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="every (T, seed) of one algorithm")
    run.add_argument("--config", required=True)
    run.add_argument("--traces", action="store_true", help="also write per-round trace CSVs")
    run.add_argument("--jobs", type=_positive, default=None, help="worker processes (default: CPU count)")
    run.add_argument("--timing", action="store_true", help="record wall_ms (otherwise 0, keeping output byte-stable)")
    run.add_argument("--out", default=None, help="override output_dir")

    sweep = sub.add_parser("sweep", help="grid over T, C_target, beta and algorithm, plus slope fits")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--jobs", type=_positive, default=None)
    sweep.add_argument("--timing", action="store_true")
    sweep.add_argument("--out", default=None)

    val = sub.add_parser("validate", help="oracle-equivalence and coverage suites")
    val.add_argument("--suite", choices=sorted(SUITES), action="append", help="repeatable; default runs all")
    val.add_argument("--proj-tol", type=float, default=None, help="mutation knob for the projection suite")
    val.add_argument("--radius-scale", type=float, default=None, help="mutation knob for the coverage suite")
    return p


def _experiment(args, kind: str) -> int:
    try:
        cfg = load_config(args.config, kind)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_experiment(cfg, traces=getattr(args, "traces", False), jobs=args.jobs, timing=args.timing, out_dir=args.out)
    except InfeasibleInstance as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvalidConfig as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def _validate(args) -> int:
    ok = True
    for name in args.suite or list(SUITES):
        kw = {}
        if name == "projection" and args.proj_tol is not None:
            kw["proj_tol"] = args.proj_tol
        if name == "coverage" and args.radius_scale is not None:
            kw["radius_scale"] = args.radius_scale
        report = SUITES[name](**kw)
        print(report.to_json(), flush=True)
        ok &= report.passed
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return _validate(args)
    return _experiment(args, args.command)


if __name__ == "__main__":
    sys.exit(main())
