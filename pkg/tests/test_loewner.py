"""Tests for Loewner integration, traces and the inverse zipper."""

import cmath
import math

import numpy as np
import pytest

from loewnerlab.config import ToleranceConfig
from loewnerlab.errors import ErrorCode, GeometryError, InputError, SwallowedError
from loewnerlab.geometry import radial_slit_radius
from loewnerlab.loewner import (
    chordal_forward,
    chordal_trace,
    conformal_radius,
    extract_driving,
    extract_radial_driving,
    halfplane_capacity,
    normalization_residual,
    radial_capacity,
    radial_forward,
    radial_trace,
    unzip_chordal,
    zipper_unwind,
)
from loewnerlab.models import Chart, CurvePath, DrivingFunction, DrivingKind, is_infinite


@pytest.fixture
def sine_driver():
    return DrivingFunction.from_function(lambda t: 0.8 * np.sin(t), 1.0, 200)


class TestChordalForward:
    def test_zero_driver_matches_closed_form(self):
        driving = DrivingFunction.constant(1.0, 100)
        z = 1 + 1j
        g, d = chordal_forward(driving, z, derivative=True)
        exact = cmath.sqrt(z * z + 4)
        assert abs(g - exact) < 1e-6
        assert abs(d - z / exact) < 1e-6

    def test_point_on_the_slit_is_swallowed(self):
        driving = DrivingFunction.constant(1.0, 100)
        with pytest.raises(SwallowedError) as exc:
            chordal_forward(driving, 1j, tolerances=ToleranceConfig(swallow=1e-2))
        assert exc.value.code is ErrorCode.SWALLOWED

    def test_rejects_radial_driver(self):
        driving = DrivingFunction.constant(1.0, 10, kind=DrivingKind.RADIAL)
        with pytest.raises(InputError):
            chordal_forward(driving, 1j)


class TestRadialForward:
    def test_derivative_at_origin(self):
        driving = DrivingFunction.constant(0.5, 50, kind=DrivingKind.RADIAL)
        g, d = radial_forward(driving, 0j, derivative=True)
        assert abs(g) < 1e-15
        assert abs(d - math.exp(0.5)) < 1e-8

    def test_conformal_radius(self):
        driving = DrivingFunction.constant(0.7, 10, kind=DrivingKind.RADIAL)
        assert conformal_radius(driving) == pytest.approx(math.exp(-0.7))


class TestChordalTrace:
    def test_zero_driver_is_vertical_segment(self):
        trace = chordal_trace(DrivingFunction.constant(1.0, 100))
        assert abs(trace.curve.tip - 2j) < 1e-3
        assert np.all(np.abs(trace.curve.points.real) < 1e-9)
        assert trace.capacity == 1.0
        assert is_infinite(trace.curve.marked["end"])

    def test_vertical_fallback(self):
        trace = chordal_trace(DrivingFunction.constant(1.0, 50), vertical=True)
        assert abs(trace.curve.tip - 2j) < 1e-3

    def test_curve_carries_capacity_times(self, sine_driver):
        trace = chordal_trace(sine_driver)
        np.testing.assert_allclose(trace.curve.times, sine_driver.grid)
        assert trace.curve.start == 0
        assert np.all(trace.curve.points[1:].imag > 0)

    def test_chain_removes_the_trace(self, sine_driver):
        trace = chordal_trace(sine_driver)
        residual = normalization_residual(trace)
        assert all(np.isfinite(v) and v < 10 for v in residual.values())

    def test_rejects_radial_driver(self):
        with pytest.raises(InputError):
            chordal_trace(DrivingFunction.constant(1.0, 10, kind=DrivingKind.RADIAL))


class TestZipper:
    def test_roundtrip(self, sine_driver):
        trace = chordal_trace(sine_driver)
        recovered = extract_driving(trace.curve)
        np.testing.assert_allclose(recovered.grid, sine_driver.grid, atol=1e-6)
        np.testing.assert_allclose(recovered.values, sine_driver.values, atol=1e-6)

    def test_capacity_of_vertical_segment(self):
        curve = CurvePath(np.linspace(0, 2j, 11), Chart.H)
        assert halfplane_capacity(curve) == pytest.approx(1.0, abs=1e-9)

    def test_unwind_sends_tip_to_driver(self, sine_driver):
        trace = chordal_trace(sine_driver)
        chain = zipper_unwind(trace.curve)
        assert len(chain.steps) == sine_driver.steps

    def test_vertical_unzip(self):
        curve = CurvePath(np.linspace(0, 2j, 11), Chart.H)
        driving, steps = unzip_chordal(curve, vertical=True)
        assert driving.horizon == pytest.approx(1.0)
        np.testing.assert_allclose(driving.values, 0.0, atol=1e-12)

    def test_rejects_disk_curve(self):
        curve = CurvePath(np.array([1, 0.5 + 0j]), Chart.D)
        with pytest.raises(GeometryError) as exc:
            extract_driving(curve)
        assert exc.value.code is ErrorCode.CHART_MISMATCH

    def test_rejects_start_off_axis(self):
        curve = CurvePath(np.array([1j, 2j]), Chart.H)
        with pytest.raises(GeometryError) as exc:
            extract_driving(curve)
        assert exc.value.code is ErrorCode.INVALID_PARAMETER

    def test_rejects_self_intersection(self):
        curve = CurvePath(np.array([0, 2j, 1 + 1j, -1 + 1j]), Chart.H)
        with pytest.raises(GeometryError) as exc:
            extract_driving(curve)
        assert exc.value.code is ErrorCode.SELF_INTERSECTION


class TestRadialTrace:
    def test_constant_driver_is_radial_slit(self):
        driving = DrivingFunction.constant(0.5, 50, kind=DrivingKind.RADIAL)
        trace = radial_trace(driving)
        assert abs(trace.curve.tip - radial_slit_radius(0.5)) < 1e-6
        assert trace.curve.chart is Chart.D
        assert trace.curve.marked["interior"] == 0

    def test_truncation(self):
        driving = DrivingFunction.constant(1.0, 40, kind=DrivingKind.RADIAL)
        trace = radial_trace(driving, horizon=0.5)
        assert trace.truncated
        assert trace.capacity == pytest.approx(0.5)

    def test_radial_roundtrip(self):
        driving = DrivingFunction.from_function(
            lambda t: 0.5 * np.sin(2 * t), 0.5, 100, DrivingKind.RADIAL
        )
        trace = radial_trace(driving)
        recovered = extract_radial_driving(trace.curve)
        np.testing.assert_allclose(recovered.values, driving.values, atol=1e-5)
        assert radial_capacity(trace.curve) == pytest.approx(0.5, abs=1e-5)

    def test_rejects_chordal_driver(self):
        with pytest.raises(InputError):
            radial_trace(DrivingFunction.constant(1.0, 10))


class TestDiscretizationConvergence:
    @staticmethod
    def sup_error(curve: CurvePath, stride: int, vertical: bool) -> float:
        coarse = CurvePath(curve.points[::stride], Chart.H)
        recovered = extract_driving(coarse, vertical)
        return float(np.max(np.abs(recovered.values - 0.8 * np.sin(recovered.grid))))

    @pytest.mark.parametrize("vertical", [False, True])
    def test_extracted_driver_converges(self, vertical):
        driving = DrivingFunction.from_function(lambda t: 0.8 * np.sin(t), 1.0, 4000)
        fine = chordal_trace(driving, vertical).curve
        at_2000 = self.sup_error(fine, 2, vertical)
        at_1000 = self.sup_error(fine, 4, vertical)
        assert at_2000 <= 5e-2
        assert at_1000 > at_2000
        assert math.log2(at_1000 / at_2000) >= 0.5
