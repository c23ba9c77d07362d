"""Command-line entry points: ``run`` the pipeline, ``synth`` a dataset."""

from __future__ import annotations

import argparse
import sys

from . import REPORT_FORMAT_VERSION, __version__
from .errors import AnemiaBenchError
from .pipeline import load_config, run_pipeline
from .synth import demo_generator_spec, generate_synthetic, load_generator_spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anemiabench",
        description="Benchmark anemia-risk classifiers on categorical survey data.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"anemiabench {__version__} (report-format {REPORT_FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the full pipeline from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the pipeline config")
    run_p.add_argument(
        "--jobs", type=int, default=1, help="parallel fold workers (default 1)"
    )
    run_p.add_argument(
        "--keep-going",
        action="store_true",
        help="record and skip a failing model instead of aborting",
    )
    run_p.add_argument(
        "--emit-encoded",
        action="store_true",
        help="also dump the canonical encoded matrix as encoded.csv",
    )
    run_p.add_argument(
        "--quiet", action="store_true", help="suppress stage timing on stderr"
    )

    synth_p = sub.add_parser(
        "synth", help="generate a synthetic dataset from a generator spec"
    )
    synth_p.add_argument(
        "--spec",
        required=True,
        help="generator-spec JSON path, or 'demo' for the bundled 13-feature spec",
    )
    synth_p.add_argument("--seed", type=int, required=True)
    synth_p.add_argument("--out", required=True, help="output directory")
    synth_p.add_argument(
        "--rows",
        type=int,
        default=None,
        help="override the spec's row count (demo default: 2000)",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            manifest = run_pipeline(
                cfg,
                jobs=args.jobs,
                keep_going=args.keep_going,
                emit_encoded=args.emit_encoded,
                quiet=args.quiet,
            )
            print(f"reports written to {cfg.output_dir} (status: {manifest.status})")
            return 0
        if args.command == "synth":
            if args.spec == "demo":
                spec = demo_generator_spec(args.rows or 2000)
            else:
                spec = load_generator_spec(args.spec)
                if args.rows:
                    from dataclasses import replace

                    spec = replace(spec, n_rows=args.rows)
            paths = generate_synthetic(spec, args.seed, args.out)
            print(f"wrote {paths['data']}, {paths['schema']}, {paths['truth']}")
            return 0
        parser.error(f"unknown command {args.command!r}")
        return 2
    except AnemiaBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
