"""Command-line interface.

Subcommands: simulate | train | evaluate | compare | sweep | plot.
Configuration comes from --preset and/or --config FILE, refined by
repeated --set key=value overrides. Exit codes: 0 success, 2 bad
configuration or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiment, plots
from .config import parse_config, preset_names
from .errors import ConfigError, NumericError
from .evaluation import EvalReport, read_errors_csv
from .training import read_history_csv

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcblran",
        description="Train and evaluate bilinear Koopman models of "
                    "control-affine benchmark systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument("--preset", choices=preset_names(), default=None,
                     help="named benchmark configuration")
    cfg.add_argument("--config", default=None, metavar="FILE",
                     help="config file with 'key = value' lines")
    cfg.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     dest="overrides", help="override one config key")
    cfg.add_argument("--out", default=None, metavar="DIR",
                     help="run directory (default: auto under the output root)")

    sub.add_parser("simulate", parents=[cfg],
                   help="build and save the per-seed datasets")
    sub.add_parser("train", parents=[cfg],
                   help="train per seed; writes checkpoints and history CSVs")
    sub.add_parser("evaluate", parents=[cfg],
                   help="evaluate checkpoints; writes error CSVs, summary, plots")

    cmp_p = sub.add_parser("compare", help="paired comparison of two finished runs")
    cmp_p.add_argument("run_a")
    cmp_p.add_argument("run_b")
    cmp_p.add_argument("--out", default=None, metavar="FILE",
                       help="also write the table as JSON")

    sweep_p = sub.add_parser("sweep", parents=[cfg],
                             help="run the pipeline over several n_train values")
    sweep_p.add_argument("--n-train", required=True, metavar="N1,N2,...",
                         help="comma-separated training-set sizes")

    plot_p = sub.add_parser("plot", help="re-render the SVGs of a finished run")
    plot_p.add_argument("run_dir")
    return parser


def _config_from(args) -> "ExperimentConfig":
    if args.preset is None and args.config is None and not args.overrides:
        raise ConfigError("no configuration given; pass --preset, --config, "
                          "and/or --set key=value")
    return parse_config(preset=args.preset, path=args.config,
                        overrides=args.overrides)


def _cmd_pipeline(args, stages) -> int:
    config = _config_from(args)
    manifest = experiment.run_experiment(config, out_dir=args.out, stages=stages)
    print(f"run directory: {manifest['run_dir']}")
    for seed, entry in sorted(manifest["seeds"].items(), key=lambda kv: int(kv[0])):
        states = ", ".join(f"{k}={v['status']}" for k, v in entry.items())
        print(f"  seed {seed}: {states}")
    if manifest.get("failed_seeds"):
        print(f"  failed seeds: {', '.join(manifest['failed_seeds'])}", file=sys.stderr)
    if manifest.get("summary"):
        summary = json.loads(Path(manifest["summary"]).read_text())
        pooled = summary["pooled"]
        print(f"  pooled median relative error: {pooled['median']:.6g} "
              f"(mean {pooled['mean']:.6g}, n={pooled['count']})")
    return 0


def _cmd_compare(args) -> int:
    table = experiment.compare_runs(args.run_a, args.run_b)
    a, b = table["model_a"], table["model_b"]
    print(f"paired comparison over {table['n_pairs']} (seed, IC) pairs")
    print(f"  {a:>10}: median {table['median_a']:.6g}, mean {table['mean_a']:.6g}")
    print(f"  {b:>10}: median {table['median_b']:.6g}, mean {table['mean_b']:.6g}")
    print(f"  win rate of {a}: {table['win_rate_a']:.3f} (ties count 0.5)")
    if args.out:
        Path(args.out).write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
        print(f"  table written to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from(args)
    try:
        values = [int(v) for v in args.n_train.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --n-train list {args.n_train!r}") from None
    result = experiment.sweep(config, values, out_dir=args.out)
    print(f"sweep over n_train={values}")
    for row in result["rows"]:
        if row["status"] == "ok":
            print(f"  n_train={row['n_train']}: median {row['median']:.6g} "
                  f"(mean {row['mean']:.6g}, n={row['count']})")
        else:
            print(f"  n_train={row['n_train']}: FAILED ({row['detail']})")
    return 0


def _cmd_plot(args) -> int:
    run_dir = Path(args.run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"no summary.json under {run_dir}")
    summary = json.loads(summary_path.read_text())
    meta = summary["meta"]
    reports = []
    for errors_file in sorted(run_dir.glob("errors_*.csv")):
        by_ic = read_errors_csv(errors_file)
        ics = np.asarray(sorted(by_ic))
        series = [by_ic[i] for i in ics]
        times = meta["dt"] * np.arange(max(len(s) for s in series))
        reports.append(EvalReport(ic_indices=ics, times=times, series=series,
                                  time_avg=np.asarray([s.mean() for s in series]),
                                  meta=dict(meta)))
    if not reports:
        raise ConfigError(f"no errors_*.csv files under {run_dir}")
    plots.plot_error_vs_time({meta.get("model", "model"): reports},
                             run_dir / "error_vs_time.svg")
    made = ["error_vs_time.svg"]
    for history_file in sorted(run_dir.glob("history_*.csv")):
        history = read_history_csv(history_file)
        out = run_dir / (history_file.stem + ".svg")
        plots.plot_history(history, out, title=history_file.stem)
        made.append(out.name)
    print(f"wrote {', '.join(made)} under {run_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_pipeline(args, stages=("data",))
        if args.command == "train":
            return _cmd_pipeline(args, stages=("data", "train"))
        if args.command == "evaluate":
            return _cmd_pipeline(args, stages=("eval", "plot"))
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "plot":
            return _cmd_plot(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
