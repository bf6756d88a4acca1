"""Command-line entry point: ``fairdegrade run`` and ``fairdegrade grid``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from fairdegrade.dataset import Metric
from fairdegrade.errors import ConfigError, FairDegradeError
from fairdegrade.experiment import (
    EXIT_CONFIG,
    EXIT_OK,
    RunConfig,
    error_exit_code,
    expand_grid,
    format_table,
    rows_to_csv,
    run_experiment,
    run_grid,
    to_json,
)


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdegrade",
        description="Fairness-degrading poisoning attack on k-median clustering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="attack one dataset at one k")
    run.add_argument("--data", required=True,
                     help="CSV path, or builtin:four_points / builtin:segregated")
    run.add_argument("--features", required=True, help="comma-separated feature columns")
    run.add_argument("--group", required=True, help="protected-group column")
    run.add_argument("--delimiter", default=",", help="field separator (UCI bank files use ';')")
    run.add_argument("--k", type=int, required=True)
    run.add_argument("--epsilon", type=int, help="attack budget (default: 10 * n)")
    run.add_argument("--metric", choices=[m.value for m in Metric], default=Metric.EUCLIDEAN.value)
    run.add_argument("--scale", action="store_true", help="min-max scale features to [0, 1]")
    size = run.add_mutually_exclusive_group()
    size.add_argument("--subsample", type=int, help="subsample to this many rows")
    size.add_argument("--full", action="store_true", help="use every row (default caps at 2000)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--name", help="dataset name used in the report")
    run.add_argument("--batch-doubling", action="store_true",
                     help="add copies in doubling batches (same result, fewer checks)")
    run.add_argument("--timing", action="store_true",
                     help="record wall time (makes the report non-reproducible)")
    _add_output_args(run)

    grid = sub.add_parser("grid", help="run a JSON grid of configurations")
    grid.add_argument("config", type=Path)
    _add_output_args(grid)
    return parser


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig.from_mapping({
        "data": args.data,
        "features": args.features,
        "group": args.group,
        "k": args.k,
        "epsilon": args.epsilon,
        "metric": args.metric,
        "scale": args.scale,
        "subsample": args.subsample,
        "full": args.full,
        "seed": args.seed,
        "name": args.name,
        "batch_doubling": args.batch_doubling,
        "timing": args.timing,
        "delimiter": args.delimiter,
    })


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if args.command == "run":
        try:
            result = run_experiment(_config_from_args(args))
        except (FairDegradeError, OSError) as exc:
            print(f"fairdegrade: {type(exc).__name__}: {exc}", file=sys.stderr)
            return error_exit_code(exc)
        results = [result]
        code = result.exit_code
    else:
        try:
            grid_doc = json.loads(args.config.read_text(encoding="utf-8"))
            cfgs = expand_grid(grid_doc)
        except (OSError, json.JSONDecodeError, ConfigError) as exc:
            print(f"fairdegrade: cannot read grid {args.config}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        results = run_grid(cfgs)
        code = EXIT_OK

    rows = [r.row for r in results]
    _emit(to_json(results) if args.format == "json" else rows_to_csv(rows), args.out)
    print(format_table(rows), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
