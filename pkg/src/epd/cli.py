"""Command-line entry point: run single experiments, sweeps, and reports.

    epd run    --config cfg.json [--algo A] [--lr0 X] [--seed N] [--out DIR]
    epd sweep  --config sweep.json [--out DIR] [--workers K]
    epd report RESULTS_DIR [--out DIR] [--no-figures]

Every run writes ``<name>.csv`` (the epoch log) plus ``<name>.config.json``
(the fully resolved config) into the output directory. ``report``
aggregates a directory of such pairs into tables, plot series and
figures. Exit status is 0 on success, 1 on any error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import (
    ConfigError,
    ExperimentConfig,
    config_to_dict,
    config_from_dict,
    iter_sweep_cells,
    load_config,
    load_sweep_config,
    save_config_echo,
    validate,
    validate_sweep,
)
from .harness import run_experiment, write_records
from .report import MissingResults, build_report, collect_runs, format_summary_table, write_report


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if args.algo is not None:
        cfg = dataclasses.replace(cfg, algorithm=args.algo, run_name=None)
    if args.lr0 is not None:
        cfg = dataclasses.replace(
            cfg,
            controller=dataclasses.replace(cfg.controller, lambda0=args.lr0),
            run_name=None,
        )
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed, run_name=None)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    return cfg


def run_single(cfg: ExperimentConfig) -> Path:
    """Execute one experiment and write its CSV + config echo; returns CSV path."""
    validate(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = run_experiment(cfg)
    name = cfg.resolved_run_name()
    csv_path = out_dir / f"{name}.csv"
    write_records(csv_path, records)
    save_config_echo(cfg, out_dir / f"{name}.config.json")
    return csv_path


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = _apply_overrides(cfg, args)
    csv_path = run_single(cfg)
    print(f"wrote {csv_path}")
    return 0


def _run_cell(cfg_dict: dict) -> tuple[str, str | None]:
    """Sweep worker: returns (run name, error message or None)."""
    cfg = config_from_dict(cfg_dict)
    try:
        run_single(cfg)
        return cfg.resolved_run_name(), None
    except Exception:
        return cfg.resolved_run_name(), traceback.format_exc(limit=3)


def _cmd_sweep(args) -> int:
    sweep = load_sweep_config(args.config)
    if args.out is not None:
        sweep.base = dataclasses.replace(sweep.base, out_dir=args.out)
    if args.workers is not None:
        sweep.workers = args.workers
    validate_sweep(sweep)
    cells = [config_to_dict(cfg) for cfg in iter_sweep_cells(sweep)]
    print(f"sweep: {len(cells)} cells, {sweep.workers} workers")
    if sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=sweep.workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(cell) for cell in cells]
    failures = [(name, err) for name, err in results if err is not None]
    for name, err in failures:
        print(f"FAILED {name}:\n{err}", file=sys.stderr)
    if failures:
        print(f"{len(failures)}/{len(cells)} cells failed; skipping aggregation",
              file=sys.stderr)
        return 1
    out_dir = Path(sweep.base.out_dir)
    report = build_report(collect_runs(out_dir))
    write_report(report, out_dir / "report")
    print(f"wrote {len(cells)} runs to {out_dir} and aggregate to {out_dir / 'report'}")
    return 0


def _cmd_report(args) -> int:
    runs = collect_runs(args.results_dir)
    report = build_report(runs)
    out_dir = Path(args.out) if args.out else Path(args.results_dir) / "report"
    write_report(report, out_dir, figures=not args.no_figures)
    print(format_summary_table(report), end="")
    print(f"wrote report to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epd",
        description="Event-based E/PD learning-rate control experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single experiment from a config file")
    p_run.add_argument("--config", required=True, help="path to the run config JSON")
    p_run.add_argument("--algo", help="override the algorithm")
    p_run.add_argument("--lr0", type=float, help="override the initial learning rate")
    p_run.add_argument("--seed", type=int, help="override the run seed")
    p_run.add_argument("--out", help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an algorithm x lr0 x seed grid")
    p_sweep.add_argument("--config", required=True, help="path to the sweep config JSON")
    p_sweep.add_argument("--out", help="override the output directory")
    p_sweep.add_argument("--workers", type=int, help="parallel worker processes")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_report = sub.add_parser("report", help="aggregate a directory of run results")
    p_report.add_argument("results_dir", help="directory holding run CSVs + config echoes")
    p_report.add_argument("--out", help="report output directory (default: <dir>/report)")
    p_report.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MissingResults, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
