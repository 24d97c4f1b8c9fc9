"""Command-line entry point: ``dynmanifold <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys

from ..manifold import ConfigError
from ..synthesis import SupportError
from .config import ScenarioConfig
from .experiments import PRESETS, run_experiment
from .io import OUTPUT_ENV, output_dir
from .montecarlo import monte_carlo, parse_snr_range
from .runner import ESTIMATORS, frame, simulate, spectrum
from .validate import report, validate


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dynmanifold",
        description="Wideband DOA simulation on dynamic array manifolds.",
        epilog=f"Outputs go to --out, else ${OUTPUT_ENV}, else ./output.")
    sub = p.add_subparsers(dest="command", required=True)

    def with_out(sp):
        sp.add_argument("--out", help="output directory")
        return sp

    s = with_out(sub.add_parser("simulate", help="synthesize an observation"))
    s.add_argument("config")
    s = with_out(sub.add_parser("frame", help="curvature and torsion series"))
    s.add_argument("config")
    s = with_out(sub.add_parser("spectrum", help="DOA spectrum and estimate"))
    s.add_argument("config")
    s.add_argument("--estimator", choices=sorted(ESTIMATORS), required=True)
    s = with_out(sub.add_parser("montecarlo", help="RMSE against SNR"))
    s.add_argument("config")
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--snr", required=True, help="start:stop:step in dB, or a comma list")
    s.add_argument("--estimators", default="f1,f2", help="comma list of f1, f2, music")
    s.add_argument("--workers", type=int, default=None)
    s = with_out(sub.add_parser("experiment", help="run a preset"))
    s.add_argument("preset", choices=sorted(PRESETS))
    s.add_argument("--trials", type=int, default=100, help="Monte Carlo trials (E6)")
    s.add_argument("--workers", type=int, default=None)
    sub.add_parser("validate", help="run the invariant checks")
    return p


def _run(args) -> int:
    if args.command == "validate":
        rep = report(validate())
        json.dump(rep, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0 if rep["passed"] else 1
    if args.command == "experiment":
        kwargs = {}
        if args.preset == "E6":
            kwargs = {"n_trials": args.trials, "workers": args.workers}
        paths = run_experiment(args.preset, args.out, **kwargs)
    else:
        cfg = ScenarioConfig.load(args.config)
        if args.command == "simulate":
            paths = simulate(cfg, args.out)
        elif args.command == "frame":
            paths = frame(cfg, args.out)
        elif args.command == "spectrum":
            paths = spectrum(cfg, args.estimator, args.out)
        else:
            kinds = []
            for name in args.estimators.split(","):
                if name.strip() not in ESTIMATORS:
                    raise ConfigError(f"--estimators: unknown estimator {name!r}")
                kinds.append(ESTIMATORS[name.strip()])
            table = monte_carlo(cfg, parse_snr_range(args.snr), args.trials, kinds,
                                workers=args.workers)
            out = output_dir(args.out)
            paths = table.write(out / f"{cfg.name}_rmse.csv",
                                {"config": cfg.resolved, "snr": args.snr, "n_trials": args.trials})
    for path in paths:
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, SupportError, ValueError, FileNotFoundError) as exc:
        print(f"dynmanifold: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
