#!/usr/bin/env python3
"""
Audio Features Command Line

    extract -i <dir> -o <out.csv> [-F <config.yaml>] [-j N] [--impute] [--log <file>]
    compare -a <column@a.csv> -b <column@b.csv>
    check -i <features.csv>
    components

Exit codes: 0 success, 1 usage or configuration error, 2 no audio found,
3 reference check failed.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from components import describe_components
from feature_config import DEFAULT_CONFIG_PATH, parse_config
from feature_errors import ConfigError, FeatureError, NoAudioFound
from pipeline import EVENT_LOGGER_NAME, extract_directory, impute_column_means, read_csv, write_csv
from rank_correlation import compare_columns, parse_column_spec
from reference_check import get_reference_verifier
from series_store import SeriesStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_AUDIO = 2
EXIT_CHECK_FAILED = 3


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; 2 is reserved for NoAudioFound here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="audio-features", description="Clinical audio feature extraction")
    subparsers = parser.add_subparsers(dest="command", required=True)

    extract = subparsers.add_parser("extract", help="Extract a feature matrix from a directory")
    extract.add_argument("-i", "--input", required=True, type=Path, help="Directory scanned recursively for .wav/.flac")
    extract.add_argument("-o", "--output", required=True, type=Path, help="Output CSV path")
    extract.add_argument("-F", "--config", type=Path, default=DEFAULT_CONFIG_PATH, help="Feature configuration YAML")
    extract.add_argument("-j", "--jobs", type=int, default=None, help="Worker processes (overrides the config)")
    extract.add_argument("--impute", action="store_true", help="Fill missing cells with column means")
    extract.add_argument("--log", type=Path, default=None, help="Write structured warning events to this file")
    extract.add_argument("--series-dir", type=Path, default=None,
                         help="Where passthrough series are stored (default <output stem>_series/)")
    extract.add_argument("--progress", action="store_true", help="Show a progress bar")

    compare = subparsers.add_parser("compare", help="Spearman rho between two CSV columns")
    compare.add_argument("-a", required=True, help="<column>@<csv>")
    compare.add_argument("-b", required=True, help="<column>@<csv>")

    check = subparsers.add_parser("check", help="Compare a corpus CSV with LibriSpeech reference values")
    check.add_argument("-i", "--input", required=True, type=Path, help="Feature CSV (not imputed)")

    subparsers.add_parser("components", help="List component names, parameters and outputs")
    return parser


def _attach_event_log(path: Path) -> logging.Handler:
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(message)s"))
    logging.getLogger(EVENT_LOGGER_NAME).addHandler(handler)
    return handler


def run_extract(args: argparse.Namespace) -> int:
    if args.jobs is not None and args.jobs < 1:
        print("error: -j must be at least 1", file=sys.stderr)
        return EXIT_USAGE

    try:
        config = parse_config(args.config)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {args.config}: {e}", file=sys.stderr)
        return EXIT_USAGE

    series_store = None
    if config.passthrough:
        series_dir = args.series_dir or args.output.with_name(f"{args.output.stem}_series")
        series_store = SeriesStore(str(series_dir))
        logger.info(f"Passthrough mode: series go to {series_store.storage_dir}")

    handler = _attach_event_log(args.log) if args.log else None
    try:
        matrix = extract_directory(
            args.input, config, n_jobs=args.jobs, progress=args.progress, series_store=series_store
        )
    except NoAudioFound as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NO_AUDIO
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if handler is not None:
            logging.getLogger(EVENT_LOGGER_NAME).removeHandler(handler)
            handler.close()

    if args.impute:
        matrix = impute_column_means(matrix)

    write_csv(matrix, args.output)
    return EXIT_OK


def run_compare(args: argparse.Namespace) -> int:
    try:
        a_column, a_csv = parse_column_spec(args.a)
        b_column, b_csv = parse_column_spec(args.b)
        result = compare_columns(a_csv, a_column, b_csv, b_column)
    except (FeatureError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    print(f"{result.rho:.17g}")
    logger.info(f"rho over {result.rows_compared} rows ({result.rows_dropped} dropped)")
    return EXIT_OK


def run_check(args: argparse.Namespace) -> int:
    try:
        matrix = read_csv(args.input)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    verifier = get_reference_verifier()
    verification = verifier.verify_matrix(matrix)
    print(verifier.format_verification_report(verification))
    return EXIT_OK if verification.passed else EXIT_CHECK_FAILED


def run_components(args: argparse.Namespace) -> int:
    for described in describe_components():
        outputs = described["fields"] or [f"{described['dims']} dim(s)"]
        defaults = ", ".join(f"{k}={v}" for k, v in described["defaults"].items())
        print(f"{described['name']:<20} {described['kind']:<7} {described['description']}")
        print(f"{'':<28} outputs: {', '.join(map(str, outputs))}")
        if defaults:
            print(f"{'':<28} defaults: {defaults}")
    return EXIT_OK


COMMANDS = {
    "extract": run_extract,
    "compare": run_compare,
    "check": run_check,
    "components": run_components,
}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
