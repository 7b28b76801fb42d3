"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace

from .config import EXPERIMENTS, ConfigError, parse_config, serialize_config
from .experiments import ExperimentFailure, run_experiment, summarize, write_manifest
from .fem import LinearSolveError
from .stokes_biot import StepFailure

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("diffuse_biot")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffuse-biot", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config", help="config file ('-' reads stdin)")
    run.add_argument("-o", "--output-dir", help="override output_dir")
    d = sub.add_parser("defaults", help="print the resolved default config of an experiment")
    d.add_argument("experiment", choices=EXPERIMENTS)
    return p


def _read(path):
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "defaults":
        sys.stdout.write(serialize_config(parse_config(f"experiment = {args.experiment}")))
        return EXIT_OK

    try:
        text = _read(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)

    t0 = time.perf_counter()
    try:
        write_manifest(cfg, "running")
        result = run_experiment(cfg)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ExperimentFailure, StepFailure, LinearSolveError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        _try_manifest(cfg, "failed", [str(exc)], time.perf_counter() - t0)
        return EXIT_SOLVER
    except ValueError as exc:
        # inconsistent settings that only surface when the run is set up
        print(f"config error: {exc}", file=sys.stderr)
        _try_manifest(cfg, "failed", [str(exc)], time.perf_counter() - t0)
        return EXIT_CONFIG

    lines = summarize(cfg, result)
    try:
        path = write_manifest(cfg, "ok", lines, time.perf_counter() - t0)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for line in lines:
        print(line)
    print(f"manifest = {path}")
    return EXIT_OK


def _try_manifest(cfg, status, lines, elapsed):
    try:
        write_manifest(cfg, status, lines, elapsed)
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
