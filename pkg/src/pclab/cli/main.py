"""Command-line entry point: ``pclab {solve,optimize,diagnose,suite}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .pipeline import run_scenario, run_suite


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pclab", description="p-compliance glue-set experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (
        ("solve", "solve the state equation for the configured glue set"),
        ("optimize", "minimise compliance plus length, then solve and diagnose"),
        ("diagnose", "solve and run the configured diagnostics"),
        ("suite", "run every scenario file in a directory"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="scenario file (a directory for suite)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--snapshots", action="store_true", help="write an SVG per accepted glue set")
        p.add_argument("--threads", type=int, default=1, help="worker count; affects wall time only")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("PCL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    if args.command == "suite":
        code, _ = run_suite(args.config, args.seed, args.out, args.snapshots, args.threads)
        return code
    mode = {"solve": "solve", "diagnose": "solve", "optimize": None}[args.command]
    code, _ = run_scenario(args.config, mode, args.seed, args.out, args.snapshots, args.threads)
    return code


if __name__ == "__main__":
    sys.exit(main())
