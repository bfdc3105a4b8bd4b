"""Tests for run configuration loading, validation and overrides."""

import pytest

from scasrec.core.config import (
    CONFIG_FILE_NAME,
    EvalConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
    WorldConfig,
    create_default_config,
    default_seed,
)
from scasrec.core.errors import ConfigError
from scasrec.core.schema import FAMILIARITY_LEVELS, TIME_BUCKETS


class TestDefaults:
    def test_section_defaults(self):
        config = RunConfig()
        assert config.world.candidates == 10
        assert config.model.width == 32
        assert config.train.beta == 0.04
        assert config.train.alpha_init == 0.1
        assert config.train.eta == 1e-4
        assert config.train.discount == 0.5
        assert config.eval.ks == [1, 2, 3, 4, 5]

    def test_t_max_resolution(self):
        assert TrainConfig().resolve_t_max(20) == 10
        assert TrainConfig().resolve_t_max(4) == 4
        assert TrainConfig(t_max=2).resolve_t_max(5) == 2
        assert TrainConfig(t_max=3).resolve_t_max(1) == 1

    def test_ks_are_sorted_and_unique(self):
        assert EvalConfig(ks=[5, 1, 3, 1]).ks == [1, 3, 5]

    def test_embedding_tables_match_scene_layout(self):
        model = ModelConfig()
        assert model.time_buckets == TIME_BUCKETS
        assert model.familiarity_levels == FAMILIARITY_LEVELS


class TestValidation:
    def test_odd_width(self):
        with pytest.raises(ValueError):
            ModelConfig(width=7)

    def test_unknown_history_mode(self):
        with pytest.raises(ValueError):
            ModelConfig(history_mode="mean")

    def test_history_must_be_wider_than_scene(self):
        with pytest.raises(ValueError):
            WorldConfig(scene_width=10, history_width=10)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            EvalConfig(methods=["scasrec", "bm25"])

    def test_non_positive_k(self):
        with pytest.raises(ValueError):
            EvalConfig(ks=[0, 1])

    def test_from_dict_wraps_errors(self):
        with pytest.raises(ConfigError) as exc:
            RunConfig.from_dict({"train": {"batch_size": 0}})
        assert "train.batch_size" in str(exc.value)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"model": {"depth": 3}})


class TestOverrides:
    def test_none_values_are_ignored(self):
        config = RunConfig().with_overrides("train", batch_size=16, t_max=None)
        assert config.train.batch_size == 16
        assert config.train.t_max is None

    def test_top_level(self, tmp_path):
        config = RunConfig().with_overrides(out=tmp_path)
        assert config.out == tmp_path

    def test_invalid_override(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides("world", noise=2.0)

    def test_original_is_unchanged(self):
        config = RunConfig()
        config.with_overrides("model", width=8)
        assert config.model.width == 32


class TestLoad:
    def test_scasrec_table(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text(
            "[scasrec.train]\nbatch_size = 16\nrl = true\n\n[scasrec.eval]\nks = [3, 1]\n"
        )
        config = RunConfig.load(path)
        assert config.train.batch_size == 16
        assert config.train.rl is True
        assert config.eval.ks == [1, 3]

    def test_unknown_top_level_table(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[other]\nx = 1\n")
        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "absent.toml")

    def test_broken_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[scasrec.train\n")
        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_search_finds_file_in_parent(self, tmp_path, monkeypatch):
        (tmp_path / CONFIG_FILE_NAME).write_text("[scasrec.model]\nwidth = 16\n")
        nested = tmp_path / "a" / "b"
        nested.mkdir(parents=True)
        monkeypatch.chdir(nested)
        assert RunConfig.load().model.width == 16

    def test_default_file_loads_to_defaults(self, tmp_path):
        path = tmp_path / CONFIG_FILE_NAME
        create_default_config(path)
        loaded = RunConfig.load(path)
        assert loaded.to_dict() == RunConfig().to_dict()


class TestSeedAndFingerprint:
    def test_env_seed(self, monkeypatch):
        monkeypatch.setenv("SCASREC_SEED", "17")
        assert default_seed() == 17
        assert TrainConfig().seed == 17

    def test_bad_env_seed(self, monkeypatch):
        monkeypatch.setenv("SCASREC_SEED", "seventeen")
        with pytest.raises(ConfigError):
            default_seed()

    def test_fingerprint_is_stable(self):
        assert RunConfig().fingerprint() == RunConfig().fingerprint()

    def test_fingerprint_tracks_changes(self):
        changed = RunConfig().with_overrides("train", beta=0.08)
        assert changed.fingerprint() != RunConfig().fingerprint()

    def test_header_json_is_compact(self):
        header = RunConfig().header_json()
        assert "\n" not in header
        assert '"beta":0.04' in header
