"""Tests for configuration management."""

import json
import stat
import tempfile
from pathlib import Path
from unittest.mock import patch

import pytest

from loewnerlab.config import (
    SEED_ENV,
    THREADS_ENV,
    LabConfig,
    LoopSoupConfig,
    OptimizerConfig,
    RunConfig,
    SamplerDefaults,
    ToleranceConfig,
    get_config_dir,
    worker_count,
)
from loewnerlab.errors import ConfigError, ErrorCode


@pytest.fixture
def temp_config_dir():
    """Create a temporary config directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        config_dir = Path(tmpdir) / ".loewnerlab"
        config_dir.mkdir(parents=True, exist_ok=True)
        with patch("loewnerlab.config.get_config_dir", return_value=config_dir):
            yield config_dir


class TestConfigBasics:
    """Tests for default values."""

    def test_default_tolerances(self):
        tol = ToleranceConfig()
        assert tol.geometric == 1e-6
        assert tol.algebraic == 1e-10
        assert tol.deterministic == 1e-3
        assert tol.marked_radius == 0.05

    def test_default_loop_budget(self):
        loops = LoopSoupConfig()
        assert loops.bridge_points == 256
        assert loops.t_min_divisor == 8.0

    def test_default_optimizer(self):
        opt = OptimizerConfig()
        assert opt.armijo == 1e-4
        assert opt.shrink == 0.5
        assert opt.refresh_every == 10

    def test_sampler_policy_normalized(self):
        assert SamplerDefaults(swallow_policy=" Reject ").swallow_policy == "reject"


class TestConfigValidation:
    """Invalid values raise ConfigError."""

    def test_negative_tolerance(self):
        with pytest.raises(ConfigError) as exc:
            ToleranceConfig(geometric=-1.0)
        assert exc.value.code is ErrorCode.CONFIG_INVALID

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            SamplerDefaults(swallow_policy="bounce")

    def test_bad_shrink(self):
        with pytest.raises(ConfigError):
            OptimizerConfig(shrink=1.5)

    def test_bad_loop_samples(self):
        with pytest.raises(ConfigError):
            LoopSoupConfig(n_samples=0)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            LabConfig.from_dict({"loops": {"n_sample": 5}})


class TestConfigPersistence:
    """Save/load round trip and environment overrides."""

    def test_save_and_load(self, temp_config_dir, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        monkeypatch.delenv(SEED_ENV, raising=False)
        config = LabConfig()
        config.threads = 3
        config.seed = 7
        config.loops = LoopSoupConfig(n_samples=1234)
        config.save()

        saved = json.loads((temp_config_dir / "config.json").read_text())
        assert saved["threads"] == 3

        loaded = LabConfig.load()
        assert loaded.threads == 3
        assert loaded.seed == 7
        assert loaded.loops.n_samples == 1234

    def test_partial_file(self, temp_config_dir, monkeypatch):
        monkeypatch.delenv(SEED_ENV, raising=False)
        (temp_config_dir / "config.json").write_text(json.dumps({"seed": 11}))
        loaded = LabConfig.load()
        assert loaded.seed == 11
        assert loaded.tolerances == ToleranceConfig()

    def test_env_overrides(self, temp_config_dir, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "2")
        monkeypatch.setenv(SEED_ENV, "99")
        loaded = LabConfig.load()
        assert loaded.threads == 2
        assert loaded.seed == 99

    def test_bad_env_ignored(self, temp_config_dir, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        monkeypatch.delenv(SEED_ENV, raising=False)
        assert LabConfig.load().threads == LabConfig().threads

    def test_config_dir_permissions(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with patch("loewnerlab.config.Path.home", return_value=Path(tmpdir)):
                config_dir = get_config_dir()
            assert config_dir == Path(tmpdir) / ".loewnerlab"
            assert stat.S_IMODE(config_dir.stat().st_mode) == 0o700


class TestWorkerCount:
    def test_cap_applies(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "2")
        assert worker_count(8) == 2
        assert worker_count(1) == 1

    def test_no_cap(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert worker_count(5) == 5

    def test_at_least_one(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert worker_count(0) == 1


class TestRunConfig:
    def test_round_trip(self):
        run = RunConfig(command="trace", seed=42, kappa=2.0, eps_grid=[0.8, 0.6])
        data = json.loads(json.dumps(run.to_dict()))
        assert RunConfig.from_dict(data) == run

    def test_run_id_depends_on_seed(self):
        assert RunConfig(command="sample", seed=255).run_id == "sample-ff"
        assert RunConfig(command="sample", seed=1).run_id != RunConfig(command="sample", seed=2).run_id

    def test_malformed(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"command": "x", "bogus": 1})
