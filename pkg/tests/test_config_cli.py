"""Preset tables, config parsing, and the command-line pipeline."""

import json

import numpy as np
import pytest

from tcblran.cli import main
from tcblran.config import (
    PRESETS,
    config_to_flat,
    parse_config,
    preset_names,
)
from tcblran.errors import ConfigError
from tcblran.experiment import output_root, run_dir_for

# Small enough that a train + evaluate round trip takes well under a second.
TINY = ["system=pendulum", "model=tcblran", "weights.gamma_tc=0.5",
        "t_span=5", "lift_dim=6", "n_train=8", "seeds=0",
        "arch.latent_dim=4", "arch.encoder_hidden=8", "arch.decoder_hidden=8",
        "weights.k_m=1", "weights.k_tm=2", "batch_size=4",
        "trainer.epochs=2", "eval.horizon=0.5", "eval.n_ics=2"]

TINY_BASELINE = [kv for kv in TINY
                 if not kv.startswith(("model=", "weights.gamma_tc="))]
TINY_BASELINE += ["model=blran", "weights.gamma_tc=0"]


def set_flags(pairs):
    out = []
    for kv in pairs:
        out += ["--set", kv]
    return out


class TestPresets:
    def test_pendulum_clean_tcblran_column(self):
        cfg = parse_config(preset="pendulum-clean-tcblran")
        assert cfg.system == "pendulum" and cfg.model == "tcblran"
        assert cfg.n_train == 32 and cfg.snr_db is None
        assert cfg.arch.latent_dim == 12
        assert cfg.arch.encoder_hidden == cfg.arch.decoder_hidden == 128
        assert cfg.weights.k_m == 12 and cfg.weights.k_tm == 2
        assert cfg.weights.batch_size == cfg.trainer.batch_size == 32
        assert (cfg.weights.gamma_id, cfg.weights.gamma_fwd,
                cfg.weights.gamma_tc) == (1.0, 1.0, 2.0)
        assert cfg.trainer.weight_decay == 0.1

    def test_vdp_20db_blran_column(self):
        cfg = parse_config(preset="vdp-20db-blran")
        assert cfg.system == "vanderpol" and cfg.model == "blran"
        assert cfg.snr_db == 20.0 and cfg.n_train == 256
        assert cfg.weights.k_m == 32
        assert cfg.weights.batch_size == 64
        assert cfg.arch.encoder_hidden == 192
        assert cfg.weights.gamma_fwd == 1.0 and cfg.weights.gamma_tc == 0.0
        assert cfg.trainer.weight_decay == 1.0

    def test_catalog_is_complete(self):
        # 3 systems x 2 noise levels x 2 model kinds
        assert len(PRESETS) == 12
        assert preset_names() == sorted(PRESETS)

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_every_preset_is_valid(self, name):
        cfg = parse_config(preset=name)
        if cfg.model == "blran":
            assert cfg.weights.gamma_tc == 0.0
        else:
            assert cfg.weights.gamma_tc > 0.0
        # shared training schedule across the whole table
        assert cfg.trainer.lr0 == 0.01
        assert cfg.trainer.milestones == (30, 100, 200, 400)
        assert cfg.trainer.epochs == 600


class TestParseConfig:
    def test_empty_lists_required_keys(self):
        with pytest.raises(ConfigError, match="system.*model"):
            parse_config(overrides={"dt": "0.1"})

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="unknown config key 'bogus'"):
            parse_config(preset="pendulum-clean-blran",
                         overrides={"bogus": "3"})

    def test_bad_value_named(self):
        with pytest.raises(ConfigError, match="bad value for 'trainer.epochs'"):
            parse_config(preset="pendulum-clean-blran",
                         overrides={"trainer.epochs": "three"})

    def test_constraint_violation_becomes_config_error(self):
        with pytest.raises(ConfigError, match="k_tm"):
            parse_config(preset="pendulum-clean-blran",
                         overrides={"weights.k_tm": "1"})

    def test_model_loss_consistency_enforced(self):
        with pytest.raises(ConfigError, match="gamma_tc"):
            parse_config(preset="pendulum-clean-blran",
                         overrides={"weights.gamma_tc": "0.5"})
        with pytest.raises(ConfigError, match="gamma_tc"):
            parse_config(preset="pendulum-clean-tcblran",
                         overrides={"weights.gamma_tc": "0"})

    def test_dot_path_override_list_form(self):
        cfg = parse_config(preset="pendulum-clean-tcblran",
                           overrides=["trainer.epochs=3", "seeds=0,1,2"])
        assert cfg.trainer.epochs == 3
        assert cfg.seeds == (0, 1, 2)

    def test_batch_size_sets_both_sections(self):
        cfg = parse_config(preset="pendulum-clean-tcblran",
                           overrides={"batch_size": "16"})
        assert cfg.weights.batch_size == 16
        assert cfg.trainer.batch_size == 16

    def test_file_with_comments_and_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment line\n"
                        "n_train = 10   # trailing comment\n"
                        "\n"
                        "trainer.epochs = 7\n")
        cfg = parse_config(preset="pendulum-clean-tcblran", path=path,
                           overrides=["trainer.epochs=9"])
        assert cfg.n_train == 10       # file beats preset
        assert cfg.trainer.epochs == 9  # override beats file

    def test_malformed_file_line_reported(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("system pendulum\n")
        with pytest.raises(ConfigError, match="1"):
            parse_config(path=path)

    def test_snr_spellings(self):
        cfg = parse_config(preset="pendulum-20db-blran",
                           overrides={"snr_db": "clean"})
        assert cfg.snr_db is None

    def test_echo_round_trip(self):
        for name in ("duffing-20db-tcblran", "vdp-clean-blran"):
            cfg = parse_config(preset=name, overrides=["seeds=0,3"])
            assert parse_config(overrides=config_to_flat(cfg)) == cfg


class TestRunDirs:
    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TCBLRAN_OUTPUT_ROOT", str(tmp_path))
        assert output_root() == tmp_path
        cfg = parse_config(preset="pendulum-clean-tcblran")
        assert run_dir_for(cfg) == tmp_path / "pendulum-clean-tcblran"
        noisy = parse_config(preset="pendulum-20db-blran")
        assert run_dir_for(noisy).name == "pendulum-20db-blran"

    def test_explicit_out_wins(self, tmp_path):
        cfg = parse_config(preset="pendulum-clean-tcblran",
                           overrides={"out_dir": "sub"})
        assert run_dir_for(cfg, out_dir=tmp_path / "x") == tmp_path / "x"


class TestPipeline:
    def run_tiny(self, out, extra=(), command="train", pairs=TINY):
        return main([command, *set_flags(list(pairs) + list(extra)),
                     "--out", str(out)])

    def test_smoke_run_emits_all_artifacts(self, tmp_path, capsys):
        d = tmp_path / "run"
        assert self.run_tiny(d) == 0
        for name in ("dataset_0.npz", "checkpoint_0.npz", "history_0.csv",
                     "manifest.json"):
            assert (d / name).exists(), name
        assert self.run_tiny(d, command="evaluate") == 0
        for name in ("errors_0.csv", "summary.json", "error_vs_time.svg"):
            assert (d / name).exists(), name
        out = capsys.readouterr().out
        assert "pooled median relative error" in out
        manifest = json.loads((d / "manifest.json").read_text())
        assert manifest["schema"] == "tcblran/manifest-v1"
        assert manifest["config"]["system"] == "pendulum"
        assert manifest["failed_seeds"] == []

    def test_simulate_stage_only(self, tmp_path):
        d = tmp_path / "sim"
        assert self.run_tiny(d, command="simulate") == 0
        assert (d / "dataset_0.npz").exists()
        assert not (d / "checkpoint_0.npz").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert self.run_tiny(d) == 0
            assert self.run_tiny(d, command="evaluate") == 0
        for name in ("history_0.csv", "errors_0.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_missing_config_exits_2(self):
        assert main(["train"]) == 2

    def test_config_error_exits_2(self):
        assert main(["train", "--set", "system=pendulum",
                     "--set", "model=blran", "--set", "weights.k_tm=1"]) == 2

    def test_numeric_failure_exits_3(self, tmp_path):
        with np.errstate(all="ignore"):
            rc = self.run_tiny(tmp_path / "bad", extra=["trainer.lr0=1e200"])
        assert rc == 3
        # partial results survive the failure
        assert (tmp_path / "bad" / "dataset_0.npz").exists()
        manifest = json.loads((tmp_path / "bad" / "manifest.json").read_text())
        assert manifest["failed_seeds"] == ["0"]

    def test_evaluate_without_checkpoint_exits_2(self, tmp_path):
        assert self.run_tiny(tmp_path / "fresh", command="evaluate") == 2

    def test_usage_error_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_compare_command(self, tmp_path, capsys):
        a, b = tmp_path / "tc", tmp_path / "bl"
        assert self.run_tiny(a) == 0
        assert self.run_tiny(a, command="evaluate") == 0
        assert self.run_tiny(b, pairs=TINY_BASELINE) == 0
        assert self.run_tiny(b, pairs=TINY_BASELINE, command="evaluate") == 0
        table_path = tmp_path / "table.json"
        assert main(["compare", str(a), str(b), "--out", str(table_path)]) == 0
        assert "win rate" in capsys.readouterr().out
        table = json.loads(table_path.read_text())
        assert table["model_a"] == "tcblran" and table["model_b"] == "blran"
        assert table["n_pairs"] == 2  # 1 seed x 2 ICs
        assert 0.0 <= table["win_rate_a"] <= 1.0
        assert table["config_a"]["system"] == table["config_b"]["system"]

    def test_compare_mismatched_runs_exits_2(self, tmp_path):
        a, b = tmp_path / "tc", tmp_path / "other"
        assert self.run_tiny(a) == 0
        assert self.run_tiny(a, command="evaluate") == 0
        assert self.run_tiny(b, extra=["n_train=10"]) == 0
        assert self.run_tiny(b, extra=["n_train=10"], command="evaluate") == 0
        assert main(["compare", str(a), str(b)]) == 2

    def test_sweep_one_row_per_value(self, tmp_path):
        d = tmp_path / "sweep"
        rc = main(["sweep", *set_flags(TINY), "--n-train", "8,10",
                   "--out", str(d)])
        assert rc == 0
        result = json.loads((d / "sweep.json").read_text())
        assert result["schema"] == "tcblran/sweep-v1"
        assert [row["n_train"] for row in result["rows"]] == [8, 10]
        assert all(row["status"] == "ok" for row in result["rows"])
        assert all("median" in row for row in result["rows"])
        assert (d / "error_vs_n_train.svg").exists()
        assert (d / "n_train_8" / "summary.json").exists()

    def test_plot_command_rerenders(self, tmp_path):
        d = tmp_path / "run"
        assert self.run_tiny(d) == 0
        assert self.run_tiny(d, command="evaluate") == 0
        (d / "error_vs_time.svg").unlink()
        assert main(["plot", str(d)]) == 0
        assert (d / "error_vs_time.svg").exists()
        assert (d / "history_0.svg").exists()
        svg = (d / "error_vs_time.svg").read_text()
        assert "<svg" in svg
