"""Tests for SLE driver sampling and stay probabilities."""

import numpy as np
import pytest

from loewnerlab.config import SamplerDefaults
from loewnerlab.energies import rho_energy
from loewnerlab.errors import ErrorCode, GeometryError, LabError
from loewnerlab.geometry import DiskRegion, geodesic_neighborhood
from loewnerlab.models import Chart, DrivingKind
from loewnerlab.sampler import (
    SamplerConfig,
    estimate_stay_probability,
    quadratic_variation,
    sample_batch,
    sample_driving,
    sample_path,
    sample_trace,
)


class TestSamplerConfig:
    def test_defaults(self):
        config = SamplerConfig(kappa=2.0)
        assert config.dt == pytest.approx(1 / 400)
        assert not config.forced

    def test_rho_zero_is_not_forced(self):
        assert not SamplerConfig(kappa=2.0, rho=0.0).forced
        assert SamplerConfig(kappa=2.0, rho=1.0).forced

    @pytest.mark.parametrize(
        "overrides",
        [
            {"kappa": 5.0},
            {"kappa": 2.0, "rho": -3.0},
            {"kappa": 2.0, "steps": 0},
            {"kappa": 2.0, "horizon": 0.0},
            {"kappa": 2.0, "swallow_policy": "ignore"},
        ],
    )
    def test_rejects(self, overrides):
        with pytest.raises(LabError):
            SamplerConfig(**overrides)

    def test_from_defaults(self):
        defaults = SamplerDefaults(steps=50, horizon=2.0, swallow_policy="reject")
        config = SamplerConfig.from_defaults(defaults, 1.0, seed=9)
        assert config.steps == 50
        assert config.horizon == 2.0
        assert config.swallow_policy == "reject"
        assert config.seed == 9

    def test_to_dict_reports_force_point(self):
        data = SamplerConfig(kappa=2.0, rho=1.0, start=0.5).to_dict()
        assert data["force_point"] == 0.5
        assert data["kind"] == "chordal"


class TestDrivers:
    def test_kappa_zero_is_deterministic(self):
        driving = sample_driving(SamplerConfig(kappa=0.0, steps=20))
        np.testing.assert_array_equal(driving.values, np.zeros(21))

    def test_rho_zero_matches_plain_sampling(self):
        plain = sample_driving(SamplerConfig(kappa=2.0, steps=50, seed=5))
        forced = sample_driving(SamplerConfig(kappa=2.0, rho=0.0, steps=50, seed=5))
        np.testing.assert_array_equal(plain.values, forced.values)

    def test_reproducible_by_index(self):
        config = SamplerConfig(kappa=2.0, steps=50, seed=5)
        np.testing.assert_array_equal(sample_driving(config, 3).values, sample_driving(config, 3).values)
        assert not np.array_equal(sample_driving(config, 3).values, sample_driving(config, 4).values)

    def test_start_value(self):
        driving = sample_driving(SamplerConfig(kappa=1.0, steps=10, start=0.7))
        assert driving.values[0] == 0.7

    def test_terminal_variance(self):
        config = SamplerConfig(kappa=2.0, steps=50, n_paths=2000, seed=11, workers=2)
        finals = np.array([p.driving.values[-1] for p in sample_batch(config)])
        assert finals.var() == pytest.approx(2.0, abs=0.25)
        assert abs(finals.mean()) < 0.15

    def test_quadratic_variation(self):
        driving = sample_driving(SamplerConfig(kappa=2.0, steps=4000, seed=3))
        assert quadratic_variation(driving) == pytest.approx(2.0, abs=0.2)

    def test_batch_order(self):
        config = SamplerConfig(kappa=1.0, steps=10, n_paths=5, workers=3)
        paths = sample_batch(config)
        assert [p.index for p in paths] == list(range(5))
        np.testing.assert_array_equal(paths[2].driving.values, sample_driving(config, 2).values)


class TestForcedDrivers:
    def test_deterministic_forced_path_has_zero_energy(self):
        config = SamplerConfig(kappa=0.0, rho=2.0, steps=100)
        path = sample_path(config)
        assert path.force_track is not None
        assert path.force_track[0] == 0.0
        assert path.driving.values[-1] < 0
        assert np.all(path.force_track[1:] > path.driving.values[1:])
        energy = rho_energy(path.driving, 2.0, track=path.force_track)
        assert energy == pytest.approx(0.0, abs=1e-10)

    def test_forced_sampling_keeps_force_point_right(self):
        config = SamplerConfig(kappa=2.0, rho=1.0, steps=50, seed=2)
        path = sample_path(config)
        assert np.all(path.force_track[1:] >= path.driving.values[1:])
        assert path.meta["grid_points"] == path.driving.steps + 1


class TestTraces:
    def test_chordal_trace(self):
        trace = sample_trace(SamplerConfig(kappa=0.0, steps=50))
        assert trace.curve.chart is Chart.H
        assert abs(trace.curve.tip - 2j) < 1e-3

    def test_radial_trace(self):
        trace = sample_trace(SamplerConfig(kappa=1.0, kind=DrivingKind.RADIAL, steps=40, horizon=0.5))
        assert trace.curve.chart is Chart.D
        assert np.all(np.abs(trace.curve.points) <= 1 + 1e-9)


class TestStayProbability:
    def test_deterministic_trace_stays_near_diameter(self):
        config = SamplerConfig(kappa=0.0, steps=50, n_paths=4, workers=2)
        estimate = estimate_stay_probability(config, geodesic_neighborhood(0.3))
        assert estimate.mean == 1.0
        assert estimate.n_samples == 4
        assert estimate.window["kappa"] == 0.0

    def test_start_outside_region(self):
        config = SamplerConfig(kappa=1.0, steps=10, n_paths=2)
        with pytest.raises(GeometryError) as exc:
            estimate_stay_probability(config, DiskRegion(0.5 + 0j, 0.2))
        assert exc.value.code is ErrorCode.HYPOTHESIS_VIOLATION
