"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 parse, 4 validation, 5 planning, 6 UNSAT,
7 solver budget, 8 I/O, 9 exported instance failed validation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from .pipeline import RunConfig, run


def _scale(text):
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("scale must be positive")
    return value


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="obdascale",
        description="Scale a seed relational instance, preserving keys, ratios and mapping-induced join selectivities.",
    )
    p.add_argument("--schema", required=True, type=Path, help="schema document")
    p.add_argument("--data", required=True, type=Path, help="directory with one <table>.csv per table")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--scale", required=True, type=_scale, help="scale factor, e.g. 10, 0.5 or 3/2")
    p.add_argument("--mappings", type=Path, help="mapping file")
    p.add_argument("--seed", type=_u64, help="derive per-column permutation offsets from this seed")
    p.add_argument("--parallelism", type=_positive, default=1)
    p.add_argument("--fixed", action="append", default=[], metavar="TABLE.COL", help="extra fixed-domain column")
    p.add_argument("--report-only", action="store_true", help="stop after planning; write only the plan report")
    p.add_argument("--validate", action="store_true", help="re-scan the export and fail on violations")
    return p


def configure_logging():
    level = os.environ.get("VIG_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    config = RunConfig(
        schema_path=args.schema,
        data_dir=args.data,
        out_dir=args.out,
        scale=args.scale,
        mappings_path=args.mappings,
        seed=args.seed,
        parallelism=args.parallelism,
        fixed_overrides=args.fixed,
        report_only=args.report_only,
        validate=args.validate,
    )
    result = run(config)
    if result.error is not None:
        print(f"obdascale: {result.failed_phase} failed: {result.error}", file=sys.stderr)
    elif result.summary is not None:
        sys.stdout.write(result.summary.report(timings=True))
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
