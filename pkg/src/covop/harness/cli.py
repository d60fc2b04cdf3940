"""``covop`` command line: run experiments, theory checks, validation, plots.

Exit codes: 0 on success, 1 if any experiment cell (or validation check)
failed, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .. import __version__
from ..exceptions import ConfigError
from ..kernels import make_grid
from .config import ExperimentConfig, load_config
from .experiment import run_experiment
from .plot import emit_plot
from .results import aggregate, read_aggregates, read_records, sniff_kind, write_csv

logger = logging.getLogger("covop")


def run_to_directory(config: ExperimentConfig, threads: int = 1) -> tuple[Path, int]:
    """Run ``config`` and write every artifact into its output directory.

    Returns the directory and the number of failed cells.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = run_experiment(config, threads=threads)
    wall = time.perf_counter() - t0

    write_csv(result.records, out / "results.csv")
    aggs = aggregate(result.records)
    write_csv(aggs, out / "aggregates.csv")
    if aggs:
        emit_plot(aggs, out / config.figure)
    with (out / "errors.log").open("w") as fh:
        for e in result.errors:
            fh.write(f"{e.kernel_family}\talpha={e.alpha!r}\tlambda={e.lambda_!r}\ttrial={e.trial}\t{e.message}\n")
    meta = {
        "config": config.to_dict(),
        "version": __version__,
        "wall_time_s": wall,
        "threads": threads,
        "records": len(result.records),
        "failed_cells": len(result.errors),
    }
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out, len(result.errors)


def _cmd_run(args) -> int:
    config = load_config(args.config).with_overrides(seed=args.seed, output_dir=args.out)
    out, failed = run_to_directory(config, threads=args.threads)
    print(f"wrote {out / 'results.csv'} and {out / config.figure}")
    if failed:
        print(f"{failed} cell(s) failed; see {out / 'errors.log'}", file=sys.stderr)
        return 1
    return 0


def _cmd_theory(args) -> int:
    from ..diagnostics import theory_report

    config = load_config(args.config).with_overrides(seed=args.seed)
    opts = dict(config.theory)
    lam = float(opts.get("length_scale", config.lambdas()[0]))
    alpha = float(opts.get("alpha", config.alphas[0]))
    spec = config.kernels[0].build(lam, alpha)
    grid = make_grid(config.d, config.m)
    report = theory_report(
        spec, grid, q=float(opts.get("q", 0.5)), reps=int(opts.get("reps", 200)), seed=config.master_seed
    )
    text = json.dumps(report.to_dict(), indent=2)
    print(text)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "theory.json").write_text(text + "\n")
    return 0


def _cmd_validate(args) -> int:
    from ..validate import run_all

    failed = 0
    for check in run_all(seed=args.seed or 0, quick=args.quick):
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: {check.detail}")
        failed += not check.passed
    return 1 if failed else 0


def _cmd_plot(args) -> int:
    kind = sniff_kind(args.csv)
    aggs = aggregate(read_records(args.csv)) if kind == "records" else read_aggregates(args.csv)
    emit_plot(aggs, args.svg)
    print(f"wrote {args.svg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override master_seed")
    common.add_argument("--threads", type=int, default=1, help="max concurrent cells")
    common.add_argument("--out", default=None, help="override output directory")

    parser = argparse.ArgumentParser(prog="covop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"covop {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("theory-check", parents=[common], help="print theory diagnostics as JSON")
    p.add_argument("config")
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("validate", parents=[common], help="run the Monte Carlo oracle checks")
    p.add_argument("--quick", action="store_true", help="smaller sample sizes")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("plot", parents=[common], help="re-render an SVG from results.csv or aggregates.csv")
    p.add_argument("csv")
    p.add_argument("svg")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
