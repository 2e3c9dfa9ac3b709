"""Command-line entry point: ``predictive-csi`` / ``python -m predictive_csi``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from ..errors import ConfigError
from .config import PRESETS, load_config, preset
from .sweep import TRACE_HEADER, emit_csv, provenance_lines, run_sweep, trace_rows

log = logging.getLogger("predictive_csi")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="predictive-csi",
        description="Simulate conventional and predictive differential CSI feedback and write a CSV of results.",
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", metavar="PATH", help="experiment file of 'key = value' lines")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--sweep", choices=("bits", "tau"), help="override the swept axis (row ordering)")
    parser.add_argument("--trials", type=int, help="override the number of trials")
    parser.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
    parser.add_argument(
        "--verbose",
        action="store_true",
        help="log progress and write a per-step trace of trial 0 next to the CSV",
    )
    return parser


def _trace_path(out):
    if out is None:
        return "trace.csv"
    stem = out[:-4] if out.endswith(".csv") else out
    return stem + ".trace.csv"


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    try:
        config = load_config(args.config) if args.config else preset(args.preset)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.sweep is not None:
            overrides["sweep"] = args.sweep
        if args.trials is not None:
            overrides["trials"] = args.trials
        config = config.replace(**overrides).validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return 2

    log.info("running %d trials x %d samples", config.trials, config.samples)
    table = run_sweep(config, keep_traces=args.verbose)
    try:
        if args.out is None:
            emit_csv(table, sys.stdout, provenance_lines(config))
        else:
            emit_csv(table, args.out, provenance_lines(config))
        if args.verbose:
            path = _trace_path(args.out)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(TRACE_HEADER)
                writer.writerows(trace_rows(table))
            log.info("trace written to %s", path)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
