"""Command-line scenario runner."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import library
from .geometry import GeometryError
from .scenario import EXPERIMENTS, ScenarioError, default_out_dir, load_scenario, run_scenario, write_outputs

log = logging.getLogger("c1spacetime")


def _grid(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bad epsilon grid {text!r}") from e
    if not vals:
        raise argparse.ArgumentTypeError("empty epsilon grid")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="c1spacetime", description="Reproducible experiments on low-regularity "
                                                                 "Lorentzian metrics.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config (JSON)")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out-dir")
    run.add_argument("--epsilon-grid", type=_grid, help="comma separated, e.g. 0.125,0.0625")
    desc = sub.add_parser("describe", help="summary of a built-in metric")
    desc.add_argument("metric")
    sub.add_parser("list-metrics", help="names of built-in metrics")
    sub.add_parser("list-experiments", help="experiment kinds a scenario may request")
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse uses 2 for usage errors; 2 is reserved for failed checks here
        return 1 if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "describe":
            print(library.describe(args.metric))
            return 0
        if args.command == "list-metrics":
            for name, info in library.REGISTRY.items():
                print(f"{name:16s} {info.summary}")
            return 0
        if args.command == "list-experiments":
            for name, (_, text) in EXPERIMENTS.items():
                print(f"{name:20s} {text}")
            return 0
        sc = load_scenario(args.config, seed=args.seed, epsilon_grid=args.epsilon_grid, out_dir=args.out_dir)
        log.info("running %s (%s) on %s", sc.name, sc.kind, sc.metric["name"])
        code, report, tables = run_scenario(sc)
        paths = write_outputs(default_out_dir(sc), report, tables)
        print(json.dumps({"scenario": sc.name, "passed": report["passed"],
                          "outputs": [str(p) for p in paths]}, sort_keys=True))
        return code
    except (ScenarioError, GeometryError, ValueError, KeyError, OSError, ArithmeticError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
