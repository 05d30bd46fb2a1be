"""Tests for deformation identities, exponent checks and ratio experiments."""

import math
from dataclasses import replace

import numpy as np
import pytest

from loewnerlab.errors import ErrorCode, GeometryError, HypothesisError, InputError
from loewnerlab.geometry import (
    Mobius,
    PolygonRegion,
    RadialSlit,
    disk_automorphism,
    geodesic_neighborhood,
    radial_slit_radius,
    scaling,
)
from loewnerlab.loopsoup import LoopMassParams
from loewnerlab.models import Chart, CurvePath, DrivingFunction, DrivingKind, MarkedConfiguration
from loewnerlab.verifier import (
    BracketPoint,
    BracketReport,
    DeformationCase,
    OMCase,
    OMPoint,
    OMReport,
    check_hypotheses,
    coefficient_cross_check,
    log_term_coefficients,
    om_ratio_experiment,
    radial_normalization_check,
    radial_slits,
    ray_chord,
    standard_case,
    verify_deformation,
    verify_radial_deformation,
    verify_restriction_exponents,
)

IDENTITY = Mobius(1 + 0j, 0j, 0j, 1 + 0j)


@pytest.fixture
def params():
    return LoopMassParams(n_samples=2000, bridge_points=32, batch_size=1000, seed=1)


def strip(height: float, resolution: int = 32) -> PolygonRegion:
    """The part of 𝔻 within `height` of the real axis, counterclockwise."""
    phi = math.asin(height)
    right = np.exp(1j * np.linspace(-phi, phi, resolution))
    top = np.linspace(math.cos(phi), -math.cos(phi), resolution)[1:-1] + 1j * height
    left = -right
    bottom = -top
    boundary = np.concatenate([right, top, left, bottom])
    return PolygonRegion(boundary, Chart.D, (1 + 0j, -1 + 0j), 0.05)


def perturbed_case(kind: str, params: LoopMassParams):
    """A map close to the identity for each deformation kind."""
    if kind in ("chordal", "rho"):
        rho = 0.5 if kind == "rho" else None
        return standard_case(kind, disk_automorphism(0.05j), rho=rho, params=params)
    # growing a small slit fixes 0 and keeps the marked points on the circle
    grow = RadialSlit.removing(math.pi if kind == "radial" else math.pi / 2, 0.02).inverse()
    case = standard_case(kind, grow, n=2, params=params)
    if kind == "multi-radial":
        case = replace(case, region=strip(0.3))
    return case


class TestCoefficients:
    def test_lemma_values(self):
        assert log_term_coefficients("chordal") == {"x": 0.25, "y": 0.25}
        assert log_term_coefficients("rho", rho=0.0)["x"] == pytest.approx(0.25)
        assert log_term_coefficients("radial") == {"x": 0.25, "0": -0.125}
        assert log_term_coefficients("multi-radial", n=2)["0"] == pytest.approx(0.0)
        assert len(log_term_coefficients("multi-chordal", n=3)) == 6

    def test_unknown_kind(self):
        with pytest.raises(InputError):
            log_term_coefficients("spiral")

    def test_cross_check(self):
        report = coefficient_cross_check()
        assert report.passed
        assert len(report.rows) > 10

    def test_restriction_exponents(self):
        report = verify_restriction_exponents()
        failing = [row.name for row in report.rows if not row.passed]
        assert failing == []
        assert report.to_dict()["passed"]


class TestRadialNormalization:
    def test_table_and_explicit_forms_vanish(self):
        assert radial_normalization_check(samples=16).passed

    def test_driving_rows(self):
        driving = DrivingFunction.constant(0.5, 50, kind=DrivingKind.RADIAL)
        report = radial_normalization_check([driving], kappas=(2.0,), samples=4)
        names = [row.name for row in report.rows]
        assert "driving 0 conformal radius" in names
        assert report.passed

    def test_rejects_chordal_driving(self):
        with pytest.raises(InputError):
            radial_normalization_check([DrivingFunction.constant(0.5, 10)])


class TestDeformationCase:
    def test_unknown_kind(self):
        with pytest.raises(InputError):
            standard_case("spiral", IDENTITY)

    def test_chart_mismatch(self):
        curve = CurvePath(np.linspace(0, 1j, 5), Chart.H)
        config = MarkedConfiguration.chordal(-1, 1, chart=Chart.D)
        with pytest.raises(GeometryError) as exc:
            DeformationCase("chordal", (curve,), config, geodesic_neighborhood(0.5), IDENTITY)
        assert exc.value.code is ErrorCode.CHART_MISMATCH

    def test_single_curve_kinds(self):
        case = standard_case("chordal", IDENTITY)
        with pytest.raises(InputError):
            DeformationCase("chordal", case.curves * 2, case.config, case.region, IDENTITY)

    def test_multiradial_geometry(self):
        case = standard_case("multi-radial", IDENTITY, n=3)
        assert len(case.curves) == 3
        _, is_hull = case.hull_polygon()
        assert is_hull
        assert set(case.coefficients()) == {"x1", "x2", "x3", "0"}

    def test_radial_slits(self):
        slits = radial_slits(4)
        assert slits[1].start == pytest.approx(1j)
        assert abs(slits[2].tip) == pytest.approx(0.3)


class TestHypotheses:
    def test_identity_passes(self):
        diagnostics = check_hypotheses(standard_case("chordal", IDENTITY))
        assert diagnostics["conformality_residual"] < 1e-8

    def test_scaling_moves_marked_points(self):
        with pytest.raises(HypothesisError) as exc:
            check_hypotheses(standard_case("chordal", scaling(2.0)))
        assert exc.value.code is ErrorCode.HYPOTHESIS_VIOLATION

    def test_curve_leaving_neighborhood(self):
        case = standard_case("chordal", IDENTITY, eps=0.2, curves=[ray_chord(math.pi / 4)])
        with pytest.raises(HypothesisError) as exc:
            check_hypotheses(case)
        assert "neighborhood" in exc.value.message


class TestIdentities:
    def test_chordal_identity_map(self, params):
        report = verify_deformation(standard_case("chordal", IDENTITY, params=params))
        assert report.lhs == 0
        assert report.log_term == 0
        assert report.loop_difference.mean == 0
        assert report.passed

    def test_radial_identity_map(self, params):
        report = verify_radial_deformation(standard_case("radial", IDENTITY, params=params))
        assert report.discrepancy == 0
        assert report.coefficients == {"x": 0.25, "0": -0.125}
        assert report.to_dict()["passed"]

    def test_wrong_kind(self, params):
        with pytest.raises(InputError):
            verify_radial_deformation(standard_case("chordal", IDENTITY, params=params))

    def test_small_automorphism_log_term(self, params):
        report = verify_deformation(perturbed_case("chordal", params))
        assert report.log_term == pytest.approx(-0.0025, abs=1e-6)

    @pytest.mark.parametrize("kind", ["chordal", "rho", "radial", "multi-radial"])
    def test_small_perturbation_balances(self, kind, params):
        report = verify_deformation(perturbed_case(kind, params))
        assert report.log_term != 0
        assert abs(report.discrepancy) <= 1e-3 + 3 * report.stderr


class TestRayChord:
    def test_vertical_ray_is_the_diameter(self):
        chord = ray_chord(math.pi / 2, 64)
        assert chord.start == -1
        assert chord.tip == 1
        np.testing.assert_allclose(chord.points.imag, 0.0, atol=1e-12)


class TestBrackets:
    def test_monotone_widths(self):
        points = (BracketPoint(0.5, 0.0, 0.5, 0.2, 0.0, 4), BracketPoint(0.25, 0.1, 0.3, 0.2, 0.0, 4))
        assert BracketReport(points).monotone

    def test_growing_widths(self):
        points = (BracketPoint(0.5, 0.1, 0.3, 0.2, 0.0, 4), BracketPoint(0.25, 0.0, 0.5, 0.2, 0.0, 4))
        assert not BracketReport(points).monotone


class TestRatioExperiments:
    def test_rejects_bad_cases(self):
        with pytest.raises(InputError):
            OMCase("spiral", IDENTITY, 1.0, (0.5,))
        with pytest.raises(InputError):
            OMCase("rho-chordal", IDENTITY, 1.0, (0.5,))
        with pytest.raises(InputError):
            OMCase("chordal", IDENTITY, 1.0, ())
        with pytest.raises(InputError):
            OMCase("rho-radial", IDENTITY, 1.0, (0.5,))
        with pytest.raises(InputError):
            OMCase("multi-chordal", IDENTITY, 1.0, (0.5,), n=1)

    def test_empty_stay_fails(self):
        point = OMPoint(0.1, math.nan, math.inf, 0.0, 0.1, 0.0, 0.0)
        assert not point.passed

    def test_growing_gap_fails_trend(self):
        point = OMPoint(0.1, 0.0, 0.01, 0.0, 0.1, 0.5, 0.5)
        report = OMReport("chordal", 1.0, 0.0, 0.0, 0.0, (point,), {"slope": -5.0, "intercept": 0.0, "stderr": 0.1})
        assert not report.trend_ok
        assert not report.passed

    def test_identity_map_has_zero_target(self):
        case = OMCase("chordal", IDENTITY, 1.0, (0.6,), n_paths=16, steps=40, workers=2)
        report = om_ratio_experiment(case)
        assert report.target == 0
        assert report.kernel_log_ratio == 0
        point = report.points[0]
        assert point.stay_base == point.stay_image
        assert report.to_dict()["kind"] == "chordal"

    @pytest.mark.parametrize(
        ("kind", "extra"),
        [("rho-radial", {"rho": 1.0, "horizon": 1.0}), ("multi-radial", {}), ("multi-chordal", {})],
    )
    def test_identity_map_has_zero_target_for_every_kind(self, kind, extra):
        loops = LoopMassParams(n_samples=200, bridge_points=16, batch_size=200, seed=1)
        case = OMCase(kind, IDENTITY, 1.0, (0.6,), n_paths=8, steps=30, workers=2, loop_params=loops, **extra)
        report = om_ratio_experiment(case)
        assert report.delta_potential == 0
        assert report.target == 0
        assert report.kernel_log_ratio == 0
        point = report.points[0]
        assert point.stay_base == point.stay_image
        assert report.to_dict()["kind"] == kind

    def test_multi_radial_horizon_matches_slits(self):
        case = OMCase("multi-radial", IDENTITY, 1.0, (0.5,), n=3)
        assert case.radial and case.multi and not case.forced
        assert radial_slit_radius(case.trace_horizon) == pytest.approx(0.3)
