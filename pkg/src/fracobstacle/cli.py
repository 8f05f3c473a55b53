"""Command-line entry point.

Exit status: 0 when every check passes, 2 when a check fails, 1 for usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2

STAGE_SETS = {
    "solve": ("solve", "mc", "frequency", "growth"),
    "validate-mc": ("solve", "mc"),
    "frequency": ("solve", "frequency", "growth"),
}


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="override the scenario seed")
    common.add_argument("--out", type=Path, default=Path("runs"), help="output root (default: ./runs)")
    common.add_argument("--threads", type=int, default=None, help="worker threads for Monte Carlo")
    common.add_argument("--quiet", action="store_true", help="only print the verdict")

    p = argparse.ArgumentParser(prog="fracobstacle", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="run every enabled stage of one or more scenarios")
    s.add_argument("configs", nargs="+", type=Path)
    s.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel (batch mode)")
    for name, what in (("validate-mc", "solve and Monte Carlo validation"),
                       ("frequency", "solve, frequency analysis and growth fits")):
        q = sub.add_parser(name, parents=[common], help=what)
        q.add_argument("target", type=Path, help="scenario JSON or an existing run directory")
    r = sub.add_parser("report", parents=[common], help="checks table, checks.csv and figures of a run")
    r.add_argument("run_dir", type=Path)
    r.add_argument("--no-figures", action="store_true")
    sub.add_parser("selftest", parents=[common], help="fast consistency examples")
    return p


def _resolve(target: Path):
    from .scenario import load_scenario

    if target.is_dir():
        cfg = target / "scenario.json"
        if not cfg.exists():
            raise ValueError(f"{target}: run directory has no scenario.json")
        return load_scenario(cfg)
    if not target.exists():
        raise ValueError(f"{target}: no such file")
    return load_scenario(target)


def _run_one(scenario, out, stages, threads, quiet, figures=True):
    from .pipeline import run_scenario
    from .report import report
    from .stochastic import set_threads

    set_threads(threads)
    run_dir, _ = run_scenario(scenario, out, stages)
    echo = (lambda *a: None) if quiet else print
    code = report(run_dir, figures=figures, echo=echo)
    print(f"{run_dir}: {'PASS' if code == EXIT_OK else 'FAIL'}")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s", datefmt="%H:%M:%S")
    if args.quiet:
        warnings.simplefilter("ignore")
    try:
        if args.command == "selftest":
            from .selftest import run_selftest
            return run_selftest(echo=(lambda *a: None) if args.quiet else print)
        if args.command == "report":
            from .report import report
            try:
                return report(args.run_dir, figures=not args.no_figures,
                              echo=(lambda *a: None) if args.quiet else print)
            except (FileNotFoundError, ValueError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_USAGE
        stages = STAGE_SETS[args.command]
        targets = args.configs if args.command == "solve" else [args.target]
        scenarios = [_resolve(t).with_seed(args.seed) for t in targets]
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    jobs = getattr(args, "jobs", 1)
    if jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_run_one, sc, args.out, stages, args.threads, args.quiet) for sc in scenarios]
            codes = [f.result() for f in futs]
    else:
        codes = [_run_one(sc, args.out, stages, args.threads, args.quiet) for sc in scenarios]
    return EXIT_FAILED if any(codes) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
