"""Tests for the CLI interface."""

import json
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from click.testing import CliRunner

from loewnerlab.artifacts import read_path_batch
from loewnerlab.cli import main


@pytest.fixture
def runner():
    """Create a CLI runner for testing."""
    return CliRunner()


@pytest.fixture
def temp_config_dir():
    """Create a temporary config directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        config_dir = Path(tmpdir) / ".loewnerlab"
        config_dir.mkdir(parents=True, exist_ok=True)
        with patch("loewnerlab.config.get_config_dir", return_value=config_dir):
            with patch("loewnerlab.cli.get_config_dir", return_value=config_dir):
                yield config_dir


@pytest.fixture
def workdir(runner, temp_config_dir):
    """Run each test inside an isolated working directory."""
    with runner.isolated_filesystem():
        yield Path.cwd()


def write_driving(path, values, horizon=1.0, kind=None):
    grid = np.linspace(0.0, horizon, len(values))
    lines = [f"# kind={kind}"] if kind else []
    lines.append("t,value")
    lines += [f"{t!r},{float(w)!r}" for t, w in zip(grid.tolist(), values, strict=True)]
    Path(path).write_text("\n".join(lines) + "\n")
    return str(path)


def json_output(result):
    """The JSON document printed on stdout."""
    text = result.stdout
    return json.loads(text[text.index("{") :])


def error_output(result):
    """The {"error": ...} line printed on stdout by a failing command."""
    lines = [line for line in result.stdout.splitlines() if line.startswith('{"error"')]
    return json.loads(lines[-1])["error"]


class TestMainCommand:
    """Tests for the group and its help."""

    def test_version_option(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "version" in result.output.lower()

    def test_help_lists_commands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for command in ("trace", "extract", "energy", "loopmass", "sample", "minimize", "verify-deform", "om-ratio"):
            assert command in result.output

    def test_no_subcommand_shows_help(self, runner, temp_config_dir):
        result = runner.invoke(main, [])
        assert result.exit_code == 0
        assert "Usage" in result.output


class TestConstantsCommand:
    def test_kappa_two(self, runner, workdir):
        result = runner.invoke(main, ["constants", "--kappa", "2", "--json", "--out-dir", "out"])
        assert result.exit_code == 0
        data = json_output(result)
        assert data["table"]["c"] == pytest.approx(-2.0)
        assert data["table"]["b"] == pytest.approx(1.0)
        assert data["table"]["b_tilde"] == pytest.approx(0.0)
        assert (workdir / "out" / "constants.json").exists()
        assert (workdir / "out" / "manifest.json").exists()

    def test_checks_pass(self, runner, workdir):
        result = runner.invoke(main, ["constants", "--kappa", "2", "--check", "--out-dir", "out"])
        assert result.exit_code == 0
        assert "restriction exponents" in result.output

    def test_help_names_the_exponent_check(self, runner):
        result = runner.invoke(main, ["constants", "--help"])
        assert result.exit_code == 0
        assert "verify_restriction_exponents" in result.output

    def test_rejects_kappa(self, runner, workdir):
        result = runner.invoke(main, ["constants", "--kappa", "6", "--out-dir", "out"])
        assert result.exit_code == 2
        assert error_output(result)["code"] == "invalid_parameter"


class TestTraceCommands:
    def test_zero_driver(self, runner, workdir):
        driving = write_driving("zero.csv", [0.0] * 101)
        result = runner.invoke(main, ["trace", "--driving", driving, "--T", "1", "--json", "--out-dir", "out"])
        assert result.exit_code == 0
        data = json_output(result)
        assert data["tip"] == pytest.approx([0.0, 2.0], abs=1e-3)
        assert (workdir / "out" / "curve.json").exists()

    def test_horizon_beyond_file(self, runner, workdir):
        driving = write_driving("zero.csv", [0.0] * 11)
        result = runner.invoke(main, ["trace", "--driving", driving, "--T", "2", "--out-dir", "out"])
        assert result.exit_code == 2
        assert error_output(result)["code"] == "invalid_parameter"

    def test_malformed_driving(self, runner, workdir):
        Path("bad.csv").write_text("t,value\n0,abc\n")
        result = runner.invoke(main, ["trace", "--driving", "bad.csv", "--out-dir", "out"])
        assert result.exit_code == 2
        error = error_output(result)
        assert error["code"] == "malformed_input"
        assert error["details"]["path"] == "bad.csv"

    def test_trace_then_extract(self, runner, workdir):
        driving = write_driving("zero.csv", [0.0] * 51)
        runner.invoke(main, ["trace", "--driving", driving, "--out-dir", "traced"])
        result = runner.invoke(main, ["extract", "--curve", "traced/curve.json", "--json", "--out-dir", "out"])
        assert result.exit_code == 0
        data = json_output(result)
        assert data["energy"] == pytest.approx(0.0, abs=1e-6)
        assert data["horizon"] == pytest.approx(1.0, abs=1e-6)
        assert (workdir / "out" / "driving.csv").exists()


class TestEnergyCommand:
    def test_radial_linear_driver(self, runner, workdir):
        driving = write_driving("radial.csv", np.linspace(0.0, 2.0, 51).tolist(), kind="radial")
        result = runner.invoke(main, ["energy", "--kind", "radial", "--driving", driving, "--json", "--out-dir", "out"])
        assert result.exit_code == 0
        assert json_output(result)["total"] == pytest.approx(2.0 / 12)

    def test_needs_input(self, runner, workdir):
        result = runner.invoke(main, ["energy", "--kind", "chordal", "--out-dir", "out"])
        assert result.exit_code == 2
        assert error_output(result)["code"] == "malformed_input"


class TestSampleCommand:
    def test_small_batch(self, runner, workdir):
        args = ["sample", "--kappa", "2", "--mc-samples", "50", "--steps", "20", "--seed", "3", "--json", "--out-dir", "out"]
        result = runner.invoke(main, args)
        assert result.exit_code == 0
        data = json_output(result)
        assert data["stats"]["n_paths"] == 50
        assert data["stats"]["expected_var"] == pytest.approx(2.0)
        assert (workdir / "out" / "paths.bin").exists()

    def test_same_seed_same_paths(self, runner, workdir):
        args = ["sample", "--kappa", "1", "--mc-samples", "5", "--steps", "10", "--seed", "4"]
        runner.invoke(main, [*args, "--out-dir", "a"])
        runner.invoke(main, [*args, "--out-dir", "b"])
        first = read_path_batch(workdir / "a" / "paths.bin").drivings
        second = read_path_batch(workdir / "b" / "paths.bin").drivings
        assert len(first) == 5
        for a, b in zip(first, second, strict=True):
            np.testing.assert_array_equal(a.values, b.values)


class TestMinimizeCommand:
    def test_zero_start_is_optimal(self, runner, workdir):
        result = runner.invoke(main, ["minimize", "--steps", "5", "--max-iter", "5", "--json", "--out-dir", "out"])
        assert result.exit_code == 0
        data = json_output(result)
        assert data["reason"] == "gradient"
        assert data["objective_trace"][-1] == 0
        assert (workdir / "out" / "driver_0.csv").exists()


class TestOMRatioCommand:
    def test_multi_radial_identity(self, runner, workdir):
        args = [
            "om-ratio", "--case", "multi-radial", "--n", "2", "--kappa", "0.5", "--eps-grid", "0.6",
            "--loop-samples", "200", "--mc-samples", "8", "--steps", "30", "--json", "--out-dir", "out",
        ]
        result = runner.invoke(main, args)
        data = json_output(result)
        assert data["kind"] == "multi-radial"
        assert data["target"] == 0
        assert (workdir / "out" / "om_ratio.json").exists()


class TestVerifyDeformCommand:
    def test_identity_passes(self, runner, workdir):
        Path("identity.json").write_text(json.dumps({"kind": "identity"}))
        args = ["verify-deform", "--case", "chordal", "--f", "identity.json", "--mc-samples", "2000", "--json", "--out-dir", "out"]
        result = runner.invoke(main, args)
        assert result.exit_code == 0
        data = json_output(result)
        assert data["passed"] is True
        assert data["discrepancy"] == 0

    def test_broken_hypothesis(self, runner, workdir):
        Path("scale.json").write_text(json.dumps({"kind": "scale", "factor": 2.0}))
        args = ["verify-deform", "--case", "chordal", "--f", "scale.json", "--mc-samples", "2000", "--out-dir", "out"]
        result = runner.invoke(main, args)
        assert result.exit_code == 2
        assert error_output(result)["code"] == "hypothesis_violation"


class TestConfigCommand:
    def test_show(self, runner, temp_config_dir):
        result = runner.invoke(main, ["config", "--show"])
        assert result.exit_code == 0
        assert "Threads" in result.output

    def test_set_threads(self, runner, temp_config_dir):
        result = runner.invoke(main, ["config", "--threads", "3", "--json"])
        assert result.exit_code == 0
        assert json_output(result)["threads"] == 3
        saved = json.loads((temp_config_dir / "config.json").read_text())
        assert saved["threads"] == 3
