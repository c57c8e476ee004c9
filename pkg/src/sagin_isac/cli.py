"""Command-line entry point: ``sagin-isac run|optimize|replay|scenario``.

Log verbosity comes from ``SAGIN_ISAC_LOG`` (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .experiments import (
    DEFAULT_TRIALS,
    EXPERIMENTS,
    ExperimentSpec,
    parse_sweep,
    replay,
    run_experiment,
    run_optimize,
)
from .scenario import ScenarioError, dump_scenario, load_scenario
from .sca import MODES

log = logging.getLogger("sagin_isac")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sagin-isac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep and write CSV outputs")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--scenario", type=Path, help="scenario YAML (default: packaged defaults)")
    run.add_argument("--seed", type=_u64, help="RNG seed (default: scenario rng_seed)")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--sweep", help="start:stop:step (inclusive) or comma list")
    run.add_argument("--trials", type=int, default=DEFAULT_TRIALS,
                     help="Monte Carlo trials per hypothesis (roc)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for sweep cells")
    run.add_argument("--plot", action="store_true", help="also write an SVG line plot")

    opt = sub.add_parser("optimize", help="optimize one scenario")
    opt.add_argument("--scenario", type=Path)
    opt.add_argument("--seed", type=_u64)
    opt.add_argument("--out", type=Path, required=True)
    opt.add_argument("--mode", choices=MODES, default="proposed")

    rep = sub.add_parser("replay", help="rerun a manifest and compare outputs")
    rep.add_argument("manifest", type=Path)
    rep.add_argument("--out", type=Path, required=True)
    rep.add_argument("--jobs", type=int, default=1)

    scn = sub.add_parser("scenario", help="print a scenario in canonical SI form")
    scn.add_argument("--scenario", type=Path)
    return parser


def _configure_logging() -> None:
    level = os.environ.get("SAGIN_ISAC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scenario":
            sys.stdout.write(dump_scenario(load_scenario(args.scenario)))
            return 0
        if args.command == "replay":
            report = replay(args.manifest, args.out, jobs=args.jobs)
            if report.version_note:
                log.warning(report.version_note)
            for name in report.mismatched:
                print(f"MISMATCH {name}")
            print(f"replay: {len(report.matched)} identical, {len(report.mismatched)} differ")
            return 0 if report.ok else 1
        scenario = load_scenario(args.scenario)
        if args.command == "optimize":
            result = run_optimize(scenario, args.out, seed=args.seed, mode=args.mode)
            print(f"{args.mode}: status={result.status} energy={result.objective:.6g} J")
            return 0
        spec = ExperimentSpec.default(
            args.experiment, scenario, args.out,
            seed=args.seed if args.seed is not None else scenario.rng_seed,
            trials=args.trials, jobs=args.jobs, plot=args.plot,
            **({"sweep": parse_sweep(args.sweep)} if args.sweep else {}),
        )
        for path in run_experiment(spec):
            print(path)
        return 0
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
