"""The command-line pipeline, driven in-process.

Every run directory is self-describing: datasets, checkpoints, history
CSVs, per-IC error CSVs, a pooled summary, SVG plots, and a manifest,
each embedding the schema version and the full configuration echo. The
same commands work from a shell:

    tcblran train    --preset pendulum-clean-tcblran --set seeds=0
    tcblran evaluate --preset pendulum-clean-tcblran --set seeds=0
    tcblran compare  runs/a runs/b
    tcblran sweep    --preset ... --n-train 32,64,128

This demo uses a tiny configuration so the whole tour takes seconds.
"""

import tempfile
from pathlib import Path

from tcblran.cli import main as cli

TINY = ["system=pendulum", "model=tcblran", "weights.gamma_tc=0.5",
        "t_span=5", "lift_dim=6", "n_train=8", "seeds=0",
        "arch.latent_dim=4", "arch.encoder_hidden=8", "arch.decoder_hidden=8",
        "weights.k_m=1", "weights.k_tm=2", "batch_size=4",
        "trainer.epochs=30", "eval.horizon=0.5", "eval.n_ics=2"]


def flags(extra=()):
    out = []
    for kv in TINY + list(extra):
        out += ["--set", kv]
    return out


def main():
    root = Path(tempfile.mkdtemp())
    run = root / "demo-run"

    print("== train ==")
    cli(["train", *flags(), "--out", str(run)])
    print("\n== evaluate ==")
    cli(["evaluate", *flags(), "--out", str(run)])
    print("\nrun directory now holds:")
    for p in sorted(run.iterdir()):
        print(f"  {p.name}")

    print("\n== sweep over training-set sizes ==")
    cli(["sweep", *flags(), "--n-train", "8,12", "--out", str(root / "sweep")])

    print("\n== compare against a baseline run ==")
    baseline = [kv for kv in TINY
                if not kv.startswith(("model=", "weights.gamma_tc="))]
    baseline += ["model=blran", "weights.gamma_tc=0"]
    baseline_flags = []
    for kv in baseline:
        baseline_flags += ["--set", kv]
    other = root / "baseline-run"
    cli(["train", *baseline_flags, "--out", str(other)])
    cli(["evaluate", *baseline_flags, "--out", str(other)])
    cli(["compare", str(run), str(other)])


if __name__ == "__main__":
    main()
