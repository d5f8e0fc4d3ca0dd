"""End-to-end experiment pipeline and multi-run orchestration.

One experiment = one (system, noise, model) configuration run over a list
of training seeds. Per seed the pipeline builds a dataset, trains, saves
a checkpoint plus history CSV, and evaluates; the per-seed reports are
then pooled into a summary and plots. A failure in one seed is recorded
in the manifest and does not abort the remaining seeds.
"""

from __future__ import annotations

import json
import os
import traceback
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .config import ExperimentConfig, config_to_flat
from .datagen import Dataset, build_dataset, save_dataset
from .dynamics import make_system
from .errors import ConfigError, NumericError
from .evaluation import (EvalReport, aggregate_seeds, compare, evaluate_model,
                         write_errors_csv, write_summary_json)
from .model import load_checkpoint, save_checkpoint
from .training import train

__all__ = [
    "output_root",
    "run_dir_for",
    "dataset_for_seed",
    "run_experiment",
    "compare_runs",
    "sweep",
]

OUTPUT_ROOT_ENV = "TCBLRAN_OUTPUT_ROOT"
MANIFEST_SCHEMA = "tcblran/manifest-v1"

# Offsets keep the control and noise streams of one seed disjoint.
CONTROL_SEED_OFFSET = 2_000_000
NOISE_SEED_OFFSET = 3_000_000


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def run_dir_for(config: ExperimentConfig, out_dir=None) -> Path:
    """Resolve the run directory: explicit arg > config.out_dir > auto name."""
    if out_dir is not None:
        return Path(out_dir)
    if config.out_dir:
        rel = Path(config.out_dir)
        return rel if rel.is_absolute() else output_root() / rel
    tag = "clean" if config.snr_db is None else f"{config.snr_db:g}db"
    return output_root() / f"{config.system}-{tag}-{config.model}"


def dataset_for_seed(config: ExperimentConfig, seed: int) -> Dataset:
    """Deterministic dataset for one training seed."""
    system = make_system(config.system)
    return build_dataset(system,
                         lift_seed=config.lift_seed,
                         control_seed=CONTROL_SEED_OFFSET + seed,
                         noise_seed=NOISE_SEED_OFFSET + seed,
                         n_train=config.n_train,
                         snr_db=config.snr_db,
                         dt=config.dt,
                         t_span=config.t_span,
                         x0=config.x0,
                         lift_dim=config.lift_dim)


def _seed_stage(manifest: dict, seed: int, stage: str, status: str, detail=None):
    entry = manifest["seeds"].setdefault(str(seed), {})
    entry[stage] = {"status": status}
    if detail is not None:
        entry[stage]["detail"] = detail


def run_experiment(config: ExperimentConfig, out_dir=None,
                   stages: tuple[str, ...] = ("data", "train", "eval", "plot"),
                   ) -> dict:
    """Run the pipeline for every seed; returns (and writes) the manifest.

    ``stages`` subsets the work: "data" writes dataset files, "train"
    produces checkpoints and history CSVs, "eval" writes per-IC error CSVs
    plus the pooled summary, "plot" renders SVGs. Later stages rebuild the
    dataset deterministically, so they do not require the "data" files.
    """
    run_dir = run_dir_for(config, out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    echo = config_to_flat(config)
    manifest = {"schema": MANIFEST_SCHEMA, "config": echo,
                "run_dir": str(run_dir), "stages": list(stages), "seeds": {}}
    system = make_system(config.system)
    reports: list[EvalReport] = []
    seed_errors: list[Exception] = []
    for seed in config.seeds:
        try:
            dataset = dataset_for_seed(config, seed)
            if "data" in stages:
                save_dataset(dataset, run_dir / f"dataset_{seed}.npz")
                _seed_stage(manifest, seed, "data", "ok")
            params = None
            if "train" in stages:
                cfg = replace(config, trainer=replace(config.trainer, seed=seed))
                params, history = train(cfg, dataset)
                save_checkpoint(run_dir / f"checkpoint_{seed}.npz", params,
                                seed=seed, epoch=config.trainer.epochs,
                                extra={"config": echo})
                history.to_csv(run_dir / f"history_{seed}.csv", echo)
                _seed_stage(manifest, seed, "train", "ok")
            if "eval" in stages:
                if params is None:
                    ckpt = run_dir / f"checkpoint_{seed}.npz"
                    if not ckpt.exists():
                        raise ConfigError(f"no checkpoint for seed {seed} at {ckpt}; "
                                          "run the train stage first")
                    params, _ = load_checkpoint(ckpt)
                report = evaluate_model(params, system, dataset, config.eval,
                                        model_tag=config.model, seed=seed)
                write_errors_csv(report, run_dir / f"errors_{seed}.csv", echo)
                reports.append(report)
                _seed_stage(manifest, seed, "eval", "ok")
        except Exception as exc:  # keep going: partial results stay on disk
            stage = "eval" if "eval" in stages else ("train" if "train" in stages else "data")
            _seed_stage(manifest, seed, stage, "failed",
                        detail="".join(traceback.format_exception_only(exc)).strip())
            seed_errors.append(exc)
    if "eval" in stages:
        if reports:
            summary = aggregate_seeds(reports)
            write_summary_json(summary, run_dir / "summary.json")
            manifest["summary"] = str(run_dir / "summary.json")
            if "plot" in stages:
                plots.plot_error_vs_time(
                    {config.model: reports}, run_dir / "error_vs_time.svg")
                manifest["plots"] = ["error_vs_time.svg"]
        else:
            manifest["summary"] = None
    failures = [s for s, entry in manifest["seeds"].items()
                if any(v.get("status") == "failed" for v in entry.values())]
    manifest["failed_seeds"] = failures
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True) + "\n")
    if failures and len(failures) == len(config.seeds):
        first = manifest["seeds"][failures[0]]
        detail = "; ".join(v.get("detail", "") for v in first.values()
                           if v.get("status") == "failed")
        # a numeric root cause must surface as one (CLI exit code 3)
        kind = NumericError if isinstance(seed_errors[0], NumericError) else ConfigError
        raise kind(f"every seed failed; first failure: {detail}")
    return manifest


def _load_summary(run_dir) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        raise ConfigError(f"no summary.json under {run_dir}; run evaluate first")
    return json.loads(path.read_text())


def _reports_from_summary(summary: dict) -> list[EvalReport]:
    reports = []
    for entry in summary["per_seed"]:
        by_ic = entry["time_avg_by_ic"]
        ics = np.asarray(sorted(int(i) for i in by_ic))
        avg = np.asarray([float(by_ic[str(i)] if str(i) in by_ic else by_ic[i])
                          for i in ics])
        meta = dict(summary["meta"])
        meta["seed"] = entry["seed"]
        reports.append(EvalReport(ic_indices=ics, times=np.zeros(0), series=[],
                                  time_avg=avg, meta=meta))
    return reports


def compare_runs(dir_a, dir_b) -> dict:
    """Paired comparison of two finished runs from their summary files."""
    summary_a, summary_b = _load_summary(dir_a), _load_summary(dir_b)
    table = compare(_reports_from_summary(summary_a),
                    _reports_from_summary(summary_b))
    table["run_a"] = str(dir_a)
    table["run_b"] = str(dir_b)
    table["config_a"] = summary_a["meta"]
    table["config_b"] = summary_b["meta"]
    return table


def sweep(config: ExperimentConfig, n_train_values: list[int], out_dir=None) -> dict:
    """Run the full pipeline per n_train value and tabulate pooled stats."""
    if not n_train_values:
        raise ConfigError("sweep needs at least one n_train value")
    base_dir = run_dir_for(config, out_dir)
    base_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in n_train_values:
        sub = base_dir / f"n_train_{value}"
        row = {"n_train": value, "run_dir": str(sub)}
        try:
            cfg = replace(config, n_train=value, out_dir=None)
            run_experiment(cfg, out_dir=sub)
            summary = _load_summary(sub)
            row.update(summary["pooled"])
            row["status"] = "ok"
        except Exception as exc:
            row["status"] = "failed"
            row["detail"] = "".join(traceback.format_exception_only(exc)).strip()
        rows.append(row)
    result = {"schema": "tcblran/sweep-v1", "config": config_to_flat(config),
              "rows": rows}
    (base_dir / "sweep.json").write_text(json.dumps(result, indent=2,
                                                    sort_keys=True) + "\n")
    ok = [r for r in rows if r["status"] == "ok"]
    if ok:
        plots.plot_error_vs_ntrain({config.model: ok},
                                   base_dir / "error_vs_n_train.svg")
    if not ok:
        raise ConfigError("every sweep value failed; see sweep.json")
    return result
