"""Paired evaluation: consistency-regularized model vs plain baseline.

Both model kinds share the same datasets, the same initial conditions,
and the same freshly drawn evaluation controls, so every rollout is
directly comparable pair by pair. The only difference is the temporal
consistency weight (zero for the baseline).

Runs a shortened pendulum protocol on two seeds; takes ~10 seconds.
"""

from dataclasses import replace

import numpy as np

from tcblran.config import parse_config
from tcblran.dynamics import make_system
from tcblran.evaluation import compare, evaluate_model
from tcblran.experiment import dataset_for_seed
from tcblran.training import train

SHORT = {"seeds": "0,1", "trainer.epochs": "250", "eval.horizon": "10"}


def run(preset: str):
    config = parse_config(preset=preset, overrides=SHORT)
    system = make_system(config.system)
    reports = []
    for seed in config.seeds:
        dataset = dataset_for_seed(config, seed)
        cfg = replace(config, trainer=replace(config.trainer, seed=seed))
        params, _ = train(cfg, dataset)
        report = evaluate_model(params, system, dataset, config.eval,
                                model_tag=config.model, seed=seed)
        print(f"  {config.model} seed {seed}: median time-averaged error "
              f"{np.median(report.time_avg):.4f} over {len(report.series)} ICs")
        reports.append(report)
    return reports


def main():
    print("training the consistency-regularized model:")
    tc_reports = run("pendulum-clean-tcblran")
    print("training the baseline:")
    bl_reports = run("pendulum-clean-blran")

    table = compare(tc_reports, bl_reports)
    print(f"\npaired comparison over {table['n_pairs']} (seed, IC) rollouts:")
    print(f"  {table['model_a']:>8}: median {table['median_a']:.4f}, "
          f"mean {table['mean_a']:.4f}")
    print(f"  {table['model_b']:>8}: median {table['median_b']:.4f}, "
          f"mean {table['mean_b']:.4f}")
    print(f"  win rate of {table['model_a']}: {table['win_rate_a']:.2f} "
          f"(ties count half)")


if __name__ == "__main__":
    main()
