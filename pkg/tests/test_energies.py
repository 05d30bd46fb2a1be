"""Tests for exponents, kernels, energies and potentials."""

import math

import numpy as np
import pytest

from loewnerlab.energies import (
    Case,
    F_functional,
    chordal_energy,
    chordal_potential,
    deformation_coefficients,
    dirichlet_energy,
    exponents,
    force_point_step,
    force_point_track,
    forced_energy,
    kernel,
    multiradial_potential,
    poisson_kernel,
    radial_energy,
    radial_potential,
    restriction_weight,
    rho_potential,
)
from loewnerlab.errors import ErrorCode, InputError, LabError, SwallowedError
from loewnerlab.geometry import DiskRegion, cayley
from loewnerlab.loewner import chordal_trace
from loewnerlab.loopsoup import LoopMassParams
from loewnerlab.models import INFINITY, Chart, CurvePath, DrivingFunction, DrivingKind, MarkedConfiguration


@pytest.fixture
def sine_driver():
    return DrivingFunction.from_function(lambda t: 0.8 * np.sin(t), 1.0, 200)


class TestExponents:
    def test_kappa_two(self):
        table = exponents(2)
        assert table.c == pytest.approx(-2.0)
        assert table.b == pytest.approx(1.0)
        assert table.b_tilde == pytest.approx(0.0)

    @pytest.mark.parametrize("kappa", [0.5, 2.0, 8 / 3, 4.0])
    def test_force_weights_reduce_without_rho(self, kappa):
        table = exponents(kappa, rho=0)
        assert table.alpha == pytest.approx(table.b)
        assert table.beta == pytest.approx(table.b_tilde)
        assert table.b2 == 0

    def test_eight_thirds_has_zero_charge(self):
        assert exponents(8 / 3).c == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("kappa", [0, -1, 4.5, math.inf])
    def test_rejects_kappa(self, kappa):
        with pytest.raises(LabError):
            exponents(kappa)

    def test_rejects_rho_and_n(self):
        with pytest.raises(LabError):
            exponents(2, rho=-2)
        with pytest.raises(InputError):
            exponents(2, n=0)

    def test_multiradial_interior_weight(self):
        table = exponents(2, n=3, mu=1.0)
        assert table.b_tilde_n == pytest.approx((9 - 1 - 1) / 4)

    def test_labels(self):
        table = exponents(2, n=2)
        assert table.labels(Case.CHORDAL) == ("x", "y")
        assert table.labels(Case.RADIAL) == ("x", "0")
        assert table.labels(Case.MULTI_CHORDAL) == ("x1", "x2", "x3", "x4")
        assert table.labels(Case.MULTI_RADIAL) == ("x1", "x2", "0")

    def test_to_dict(self):
        data = exponents(2).to_dict()
        assert data["kappa"] == 2.0
        assert data["c"] == pytest.approx(-2.0)


class TestDeformationCoefficients:
    def test_chordal(self):
        coefs = deformation_coefficients(Case.CHORDAL, exponents(2))
        assert coefs == pytest.approx({"x": 0.25, "y": 0.25})

    def test_forced_chordal(self):
        rho = 1.5
        coefs = deformation_coefficients(Case.FORCED_CHORDAL, exponents(2, rho=rho))
        expected = (rho + 2) * (rho + 6) / 48
        assert coefs == pytest.approx({"x": expected, "y": expected})

    def test_radial(self):
        coefs = deformation_coefficients(Case.RADIAL, exponents(1))
        assert coefs == pytest.approx({"x": 0.25, "0": -0.125})

    def test_multi_radial(self):
        coefs = deformation_coefficients(Case.MULTI_RADIAL, exponents(1, n=3, mu=0.5))
        assert coefs["x1"] == pytest.approx(0.25)
        assert coefs["0"] == pytest.approx((9 - 4 - 0.25) / 24)

    def test_coefficients_do_not_depend_on_kappa(self):
        a = deformation_coefficients(Case.RADIAL, exponents(0.5))
        b = deformation_coefficients(Case.RADIAL, exponents(3.0))
        assert a == pytest.approx(b)


class TestFFunctional:
    def test_chordal_value(self):
        table = exponents(2)
        weights = table.corrected_weights(Case.CHORDAL)
        assert weights["x"] == pytest.approx(1 + (-2) / 8)
        value = F_functional(Case.CHORDAL, table, {"x": 1.0, "y": 0.5})
        assert value == pytest.approx(-0.75 * 1.5)

    def test_identity_gives_zero(self):
        assert F_functional(Case.RADIAL, exponents(2), {"x": 0.0, "0": 0.0}) == 0

    def test_missing_point(self):
        with pytest.raises(InputError) as exc:
            F_functional(Case.CHORDAL, exponents(2), {"x": 1.0})
        assert exc.value.code is ErrorCode.MALFORMED_INPUT


class TestKernels:
    def test_poisson_halfplane(self):
        assert poisson_kernel(MarkedConfiguration.chordal(0, INFINITY)) == 1.0
        assert poisson_kernel(MarkedConfiguration.chordal(0, 2)) == pytest.approx(0.25)

    def test_poisson_disk_diameter(self):
        config = MarkedConfiguration.chordal(-1, 1, chart=Chart.D)
        assert poisson_kernel(config) == pytest.approx(0.25)

    def test_chordal_kernel_power(self):
        config = MarkedConfiguration.chordal(0, 2, kappa=1.0)
        assert kernel(config) == pytest.approx(0.25 ** exponents(1.0).b)

    def test_forced_kernel_uses_alpha(self):
        config = MarkedConfiguration.chordal(0, 2, kappa=2.0, rho=1.0)
        assert kernel(config) == pytest.approx(0.25 ** exponents(2.0, rho=1.0).alpha)

    def test_radial_kernel(self):
        config = MarkedConfiguration.radial([1, -1], kappa=2.0)
        assert kernel(config) == pytest.approx(1.0)

    def test_kernel_needs_kappa(self):
        with pytest.raises(InputError):
            kernel(MarkedConfiguration.chordal(0, 1))

    def test_multichordal_has_no_closed_form(self):
        config = MarkedConfiguration(Chart.H, (0j, 1 + 0j, 2 + 0j, 3 + 0j), links=((0, 3), (1, 2)), kappa=2.0)
        with pytest.raises(InputError):
            kernel(config)


class TestEnergies:
    def test_linear_driver(self):
        driving = DrivingFunction.from_function(lambda t: 3 * t, 2.0, 40)
        assert dirichlet_energy(driving) == pytest.approx(9.0)

    def test_zero_driver(self):
        assert chordal_energy(DrivingFunction.constant(1.0, 10)) == 0

    def test_kind_mismatch(self):
        with pytest.raises(InputError):
            radial_energy(DrivingFunction.constant(1.0, 10))
        with pytest.raises(InputError):
            chordal_energy(DrivingFunction.constant(1.0, 10, kind=DrivingKind.RADIAL))

    def test_forced_energy_without_rho(self, sine_driver):
        assert forced_energy(sine_driver, 0.0) == pytest.approx(dirichlet_energy(sine_driver))


class TestForcePoint:
    def test_chordal_track_from_tip(self):
        track = force_point_track(DrivingFunction.constant(1.0, 100))
        assert track[0] == 0
        assert track[-1] == pytest.approx(2.0, abs=1e-9)

    def test_radial_track_from_tip(self):
        driving = DrivingFunction.constant(0.5, 20, kind=DrivingKind.RADIAL)
        track = force_point_track(driving)
        assert track[-1] == pytest.approx(2 * math.acos(math.exp(-0.25)), abs=1e-12)

    def test_force_point_left_of_start(self):
        with pytest.raises(InputError):
            force_point_track(DrivingFunction.constant(1.0, 10), start=-1.0)

    def test_radial_force_point_on_driver_is_swallowed(self):
        with pytest.raises(SwallowedError) as exc:
            force_point_step(DrivingKind.RADIAL, 0.0, 0.5, 0.5, 0.01)
        assert exc.value.code is ErrorCode.FORCE_POINT_SWALLOWED


class TestChordalPotentials:
    def test_vertical_segment(self):
        curve = CurvePath(np.linspace(0, 2j, 21), Chart.H, marked={"start": 0j, "end": INFINITY})
        report = chordal_potential(curve)
        assert report.total == pytest.approx(0.0, abs=1e-12)
        assert report.truncated
        assert report.horizon == pytest.approx(1.0)

    def test_energy_of_trace(self, sine_driver):
        trace = chordal_trace(sine_driver)
        report = chordal_potential(trace.curve)
        assert report.energy == pytest.approx(dirichlet_energy(sine_driver), rel=1e-4)
        assert report.terms["energy"] == pytest.approx(report.energy / 12)

    def test_disk_chart_keeps_energy(self, sine_driver):
        trace = chordal_trace(sine_driver)
        disk_curve = CurvePath(cayley(np.asarray(trace.curve.points)), Chart.D)
        config = MarkedConfiguration.chordal(-1, 1, chart=Chart.D)
        report = chordal_potential(disk_curve, config)
        assert report.energy == pytest.approx(dirichlet_energy(sine_driver), rel=1e-4)
        assert report.terms["kernel"] == pytest.approx(-0.25 * math.log(0.25))

    def test_rho_zero_matches_chordal(self, sine_driver):
        trace = chordal_trace(sine_driver)
        config = MarkedConfiguration.chordal(0, INFINITY, rho=0.0)
        forced = rho_potential(trace.curve, config)
        plain = chordal_potential(trace.curve, config)
        assert forced.total == pytest.approx(plain.total, rel=1e-9)
        assert forced.kind == "rho-chordal"

    def test_report_dict(self, sine_driver):
        report = chordal_potential(chordal_trace(sine_driver).curve)
        data = report.to_dict()
        assert data["kind"] == "chordal"
        assert data["stderr"] == 0.0
        assert set(data["terms"]) == {"energy", "kernel"}


class TestRadialPotentials:
    def test_linear_driver(self):
        driving = DrivingFunction.from_function(lambda t: 2 * t, 1.0, 50, DrivingKind.RADIAL)
        report = radial_potential(driving)
        assert report.energy == pytest.approx(2.0)
        assert report.total == pytest.approx(2.0 / 12)

    def test_truncation(self):
        driving = DrivingFunction.from_function(lambda t: 2 * t, 1.0, 50, DrivingKind.RADIAL)
        report = radial_potential(driving, horizon=0.5)
        assert report.truncated
        assert report.horizon == pytest.approx(0.5)
        assert report.energy == pytest.approx(1.0)

    def test_single_arc_multiradial(self):
        driving = DrivingFunction.constant(0.3, 20, kind=DrivingKind.RADIAL)
        report = multiradial_potential([driving])
        assert report.total == pytest.approx(0.0, abs=1e-9)
        assert report.loop.mean == pytest.approx(0.0, abs=1e-9)

    def test_mirror_symmetric_pair(self):
        first = DrivingFunction.constant(0.2, 20, kind=DrivingKind.RADIAL)
        second = DrivingFunction.constant(0.2, 20, value=2 * math.pi / 3, kind=DrivingKind.RADIAL)
        report = multiradial_potential([first, second])
        thetas = report.diagnostics["thetas"]
        assert np.isfinite(report.total)
        assert thetas[0] + thetas[1] == pytest.approx(2 * math.pi / 3, abs=1e-6)
        assert report.diagnostics["capacity_spread"] < 1e-6

    def test_staircase_order_commutes(self):
        first = DrivingFunction.constant(0.2, 40, kind=DrivingKind.RADIAL)
        second = DrivingFunction.constant(0.2, 40, value=math.pi, kind=DrivingKind.RADIAL)
        default = multiradial_potential([first, second])
        swapped = multiradial_potential([first, second], order=[1, 0])
        assert swapped.loop.window["order"] == [1, 0]
        assert swapped.total == pytest.approx(default.total, abs=1e-4)

    def test_staircase_order_commutes_for_unequal_arcs(self):
        first = DrivingFunction.constant(0.2, 40, kind=DrivingKind.RADIAL)
        second = DrivingFunction.from_function(lambda t: 2.0 + 0.3 * t, 0.2, 40, DrivingKind.RADIAL)
        default = multiradial_potential([first, second])
        swapped = multiradial_potential([first, second], order=[1, 0])
        assert swapped.total == pytest.approx(default.total, abs=1e-3)

    def test_order_must_be_permutation(self):
        driving = DrivingFunction.constant(0.3, 10, kind=DrivingKind.RADIAL)
        with pytest.raises(InputError):
            multiradial_potential([driving], order=[1])

    def test_needs_an_arc(self):
        with pytest.raises(InputError):
            multiradial_potential([])


class TestRestrictionWeight:
    @pytest.fixture
    def curve(self):
        return CurvePath(np.linspace(-0.5 - 0.5j, -0.5 + 0.5j, 9), Chart.D)

    @pytest.fixture
    def params(self):
        return LoopMassParams(n_samples=5000, bridge_points=32, batch_size=2500, seed=3)

    def test_vanishes_at_zero_central_charge(self, curve, params):
        weight = restriction_weight(curve, DiskRegion(radius=0.8), DiskRegion(), 8 / 3, params)
        assert weight.mean == 0

    def test_negative_for_kappa_two(self, curve, params):
        weight = restriction_weight(curve, DiskRegion(radius=0.8), DiskRegion(), 2.0, params)
        assert weight.mean <= 0
        assert math.isfinite(weight.stderr)
