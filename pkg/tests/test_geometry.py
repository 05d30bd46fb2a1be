"""Tests for conformal primitives, chains, geodesics and regions."""

import math

import numpy as np
import pytest

from loewnerlab.errors import ErrorCode, GeometryError
from loewnerlab.geometry import (
    ComplementRegion,
    DiskRegion,
    ExpMap,
    HalfPlaneRegion,
    LogMap,
    MapChain,
    Mobius,
    PolygonRegion,
    Polynomial,
    PowerMap,
    RadialSlit,
    TiltedSlit,
    VerticalSlit,
    cayley,
    chord_chart,
    circle_through,
    covering_map,
    geodesic_neighborhood,
    hyperbolic_geodesic,
    keyhole_neighborhood,
    map_curve,
    map_region,
    mobius_from_points,
    polyline_distance,
    polyline_self_intersects,
    polylines_intersect,
    radial_slit_capacity,
    radial_slit_radius,
    region_contains,
    rotation,
    tube_neighborhood,
)
from loewnerlab.models import INFINITY, Chart, CurvePath, is_infinite

Z = 0.3 + 0.4j


def finite_difference(f, z, h=1e-6):
    return (f(z + h) - f(z - h)) / (2 * h)


class TestMobius:
    def test_inverse_roundtrip(self):
        m = Mobius(2, 1, 1, 3)
        assert abs(m.inverse()(m(Z)) - Z) < 1e-12

    def test_zero_determinant_rejected(self):
        with pytest.raises(GeometryError) as exc:
            Mobius(1, 2, 2, 4)
        assert exc.value.code is ErrorCode.INVALID_PARAMETER

    def test_image_of_infinity(self):
        assert Mobius(2, 1, 1, 3).image(INFINITY) == 2
        assert is_infinite(Mobius(2, 1, 0, 1).image(INFINITY))
        assert is_infinite(Mobius(1, 0, 1, -2).image(2))

    def test_abs_derivative_in_chart_at_infinity(self):
        inversion = Mobius(0, -1, 1, 0)
        assert inversion.abs_derivative(INFINITY) == pytest.approx(1.0)
        assert inversion.abs_derivative(0j) == pytest.approx(1.0)
        assert Mobius(3, 0, 0, 1).abs_derivative(INFINITY) == pytest.approx(1 / 3)

    def test_derivatives_match_difference_quotient(self):
        m = Mobius(2, 1, 1, 3)
        assert abs(m.derivative(Z) - finite_difference(m, Z)) < 1e-8

    def test_then_composes(self):
        first, second = Mobius(2, 1, 1, 3), Mobius(1, -1j, 1, 1j)
        assert abs(first.then(second)(Z) - second(first(Z))) < 1e-12


class TestCharts:
    def test_cayley_points(self):
        assert abs(cayley(1j)) < 1e-15
        assert cayley(0) == -1
        assert cayley(INFINITY) == 1
        assert is_infinite(cayley(1, "D->H"))

    def test_cayley_array_roundtrip(self):
        z = np.array([0.5 + 1j, -2 + 0.1j])
        back = cayley(cayley(z), "D->H")
        np.testing.assert_allclose(back, z, atol=1e-12)
        assert np.all(np.abs(cayley(z)) < 1)

    def test_cayley_pole(self):
        with pytest.raises(GeometryError) as exc:
            cayley(-1j)
        assert exc.value.code is ErrorCode.SINGULAR_POINT

    def test_cayley_bad_direction(self):
        with pytest.raises(GeometryError):
            cayley(1j, "H->X")

    def test_mobius_from_points(self):
        m = mobius_from_points((0, 1, INFINITY), (1, 2, 3))
        assert abs(m.image(0j) - 1) < 1e-12
        assert abs(m.image(1 + 0j) - 2) < 1e-12
        assert abs(m.image(INFINITY) - 3) < 1e-12

    def test_mobius_from_points_coincident(self):
        with pytest.raises(GeometryError) as exc:
            mobius_from_points((0, 0, 1), (1, 2, 3))
        assert exc.value.code is ErrorCode.COINCIDENT_POINTS

    def test_chord_chart(self):
        m = chord_chart(-1, 2)
        assert abs(m.image(-1 + 0j)) < 1e-15
        assert is_infinite(m.image(2 + 0j))
        assert m(1j).imag > 0

    def test_chord_chart_to_infinity(self):
        m = chord_chart(0.5, INFINITY)
        assert m(0.5) == 0

    def test_chord_chart_coincident(self):
        with pytest.raises(GeometryError):
            chord_chart(1, 1)


class TestPrimitiveMaps:
    def test_power_map_values(self):
        assert abs(PowerMap(2.0)(1j) + 1) < 1e-15
        assert abs(PowerMap(0.5)(4.0) - 2) < 1e-15

    def test_power_map_inverse(self):
        p = PowerMap(0.5)
        assert abs(p.inverse()(p(Z)) - Z) < 1e-12

    def test_power_map_derivative(self):
        p = PowerMap(1.5)
        z = 1 + 1j
        assert abs(p.derivative(z) - finite_difference(p, z)) < 1e-7

    def test_exp_log_roundtrip(self):
        z = 0.3 + 0.5j
        assert abs(LogMap(1j)(ExpMap(1j)(z)) - z) < 1e-12

    def test_polynomial_perturbation(self):
        q = Polynomial.perturbation(0.1, [0, 0, 1])
        assert complex(q(1.0)) == pytest.approx(1.1)
        _, d1, d2, d3 = q.derivatives(np.asarray(0.5 + 0j))
        assert complex(d1) == pytest.approx(1.1)
        assert complex(d2) == pytest.approx(0.2)
        assert d3 == 0

    def test_polynomial_inverse(self):
        q = Polynomial.perturbation(0.1, [0, 0, 1])
        w = 0.3 + 0.2j
        assert abs(q(q.inverse()(w)) - w) < 1e-12

    def test_covering_of_rotation_is_translation(self):
        lift = covering_map(rotation(0.4))
        z = 0.1 + 0.5j
        assert abs(lift(z) - (z + 0.4)) < 1e-12


class TestSlitMaps:
    def test_vertical_slit_sends_tip_to_base(self):
        s = VerticalSlit(0.0, 1.0)
        assert s.tip == 2j
        assert abs(s(2j)) < 1e-12
        assert abs(s.inverse()(s(Z + 1j)) - (Z + 1j)) < 1e-12

    def test_tilted_slit_without_drift_is_vertical(self):
        s = TiltedSlit.from_step(0.0, 0.0, 0.25)
        assert s.alpha == pytest.approx(0.5)
        assert abs(s.tip - 1j) < 1e-12

    def test_tilted_slit_from_tip(self):
        s = TiltedSlit.from_tip(0.0, 0.3 + 0.5j)
        assert abs(s.tip - (0.3 + 0.5j)) < 1e-9

    def test_tilted_slit_roundtrip(self):
        s = TiltedSlit.from_step(0.0, 0.3, 0.1)
        z = 0.5 + 0.7j
        assert abs(s(s.inverse()(z)) - z) < 1e-9

    def test_tilted_slit_derivative_is_analytic(self):
        chain = MapChain((TiltedSlit.from_step(0.0, 0.3, 0.1),))
        assert chain.cauchy_riemann_residual(np.array([0.5 + 0.7j, -0.4 + 1.2j])) < 1e-5

    def test_radial_slit_capacity(self):
        x = radial_slit_radius(0.5)
        assert 0 < x < 1
        assert radial_slit_capacity(x) == pytest.approx(0.5)

    def test_radial_slit_normalization(self):
        g = RadialSlit.removing(0.0, 0.5)
        assert abs(g.derivative(0j) - math.exp(0.5)) < 1e-9
        assert abs(g(0j)) < 1e-12

    def test_radial_slit_tip_goes_to_boundary(self):
        g = RadialSlit.removing(math.pi / 2, 0.5)
        assert abs(g.tip - 1j * radial_slit_radius(0.5)) < 1e-12
        assert abs(g(g.tip) - 1j) < 1e-6

    def test_radial_slit_roundtrip(self):
        g = RadialSlit.removing(0.0, 0.5)
        z = 0.3 + 0.2j
        assert abs(g.inverse()(g(z)) - z) < 1e-9

    def test_radial_slit_roundtrip_across_the_disk(self):
        # covers both Koebe branches, including |g| near 1/2 and the antipode
        g = RadialSlit.removing(0.0, 0.5)
        r, theta = np.meshgrid(np.linspace(0.05, 0.95, 19), np.linspace(-3.1, 3.1, 32))
        z = (r * np.exp(1j * theta)).ravel()
        images = g.evaluate(z)
        assert np.any(np.abs(np.abs(images) - 0.5) < 0.05)
        np.testing.assert_allclose(g.inverse().evaluate(images), z, atol=1e-7)


class TestMapChain:
    def test_schwarzian_cocycle(self):
        chain = MapChain.of(PowerMap(2.0), Mobius(1, 2, 3, 5))
        z = 1 + 1j
        expected = (1 - 4) / (2 * z**2)
        assert abs(chain.schwarzian(z) - expected) < 1e-10

    def test_schwarzian_matches_derivatives(self):
        chain = MapChain.of(Mobius(2, 1, 1, 3), PowerMap(1.5, center=-1))
        z = np.asarray(0.2 + 0.7j)
        _, d1, d2, d3 = chain.derivatives(z)
        direct = d3 / d1 - 1.5 * (d2 / d1) ** 2
        assert abs(chain.schwarzian(z) - direct) < 1e-10

    def test_inverse_roundtrip(self):
        chain = MapChain.of(PowerMap(2.0), Mobius(1, 2, 3, 5))
        z = 1 + 1j
        assert abs(chain.inverse()(chain(z)) - z) < 1e-12

    def test_of_flattens(self):
        inner = MapChain.of(PowerMap(2.0), Mobius(1, 2, 3, 5))
        assert len(MapChain.of(inner, rotation(0.1)).steps) == 3
        assert len(inner.compose(rotation(0.1)).steps) == 3

    def test_singular_point_raises(self):
        chain = MapChain.of(Mobius(0, 1, 1, 0))
        with pytest.raises(GeometryError) as exc:
            chain.schwarzian(0j)
        assert exc.value.code is ErrorCode.SINGULAR_POINT

    def test_image_through_infinity(self):
        chain = MapChain.of(Mobius(0, -1, 1, 0), rotation(0.2))
        assert chain.image(INFINITY) == 0
        assert chain.abs_derivative(INFINITY) == pytest.approx(1.0)

    def test_infinity_into_non_mobius_step(self):
        chain = MapChain.of(PowerMap(2.0))
        with pytest.raises(GeometryError):
            chain.image(INFINITY)

    def test_cauchy_riemann_residual_small(self):
        chain = MapChain.of(Mobius(2, 1, 1, 3), PowerMap(0.5))
        assert chain.cauchy_riemann_residual(np.array([0.5 + 0.5j, 1 + 2j])) < 1e-5


class TestGeodesics:
    def test_diameter(self):
        path = hyperbolic_geodesic(-1, 1, 33)
        assert np.all(np.abs(path.points.imag) < 1e-12)
        assert abs(path.points[16]) < 1e-12
        assert path.chart is Chart.D

    def test_arc_is_orthogonal_circle(self):
        path = hyperbolic_geodesic(1, 1j, 65)
        np.testing.assert_allclose(np.abs(path.points - (1 + 1j)), 1.0, atol=1e-12)
        assert np.all(np.abs(path.points) <= 1 + 1e-12)
        assert path.marked == {"start": 1, "end": 1j}

    def test_interior_end_is_radius(self):
        path = hyperbolic_geodesic(1j, 0, 11)
        assert np.all(np.abs(path.points.real) < 1e-12)
        assert path.tip == 0

    @pytest.mark.parametrize(
        "p,q,resolution",
        [(1, 1, 16), (0.5, 1, 16), (1, 2, 16), (1, -1, 1)],
    )
    def test_rejects(self, p, q, resolution):
        with pytest.raises(GeometryError):
            hyperbolic_geodesic(p, q, resolution)

    def test_circle_through(self):
        center, radius = circle_through(1, 1j, -1)
        assert abs(center) < 1e-12
        assert radius == pytest.approx(1.0)


class TestPolylines:
    def test_distance(self):
        d = polyline_distance(np.array([1j, 3 + 0j]), np.array([0, 2 + 0j]))
        np.testing.assert_allclose(d, [1.0, 1.0])

    def test_self_intersection(self):
        assert polyline_self_intersects(np.array([0, 1 + 1j, 1, 1j]))
        assert not polyline_self_intersects(np.array([0, 1 + 1j, 2, 3 + 1j]))

    def test_two_polylines(self):
        assert polylines_intersect(np.array([0, 2 + 2j]), np.array([2, 2j]))
        assert not polylines_intersect(np.array([0, 1 + 0j]), np.array([1j, 1 + 1j]))


class TestRegions:
    def test_half_plane_and_disk(self):
        assert HalfPlaneRegion().inside(np.array([1j]))[0]
        assert not HalfPlaneRegion().inside(np.array([-1j]))[0]
        assert DiskRegion().inside(np.array([0.5]))[0]
        assert DiskRegion().boundary_distance(np.array([0.25]))[0] == pytest.approx(0.75)

    def test_polygon_orientation_and_membership(self):
        clockwise = np.array([0, 1j, 1 + 1j, 1 + 0j])
        square = PolygonRegion(clockwise, Chart.D)
        assert square.inside(np.array([0.5 + 0.5j]))[0]
        assert not square.inside(np.array([2 + 0.5j]))[0]
        assert square.bounding_box() == (0.0, 1.0, 0.0, 1.0)

    def test_polygon_needs_three_vertices(self):
        with pytest.raises(GeometryError):
            PolygonRegion(np.array([0, 1 + 0j]))

    def test_exempt_points(self):
        square = PolygonRegion(np.array([0, 1 + 0j, 1 + 1j, 1j]), Chart.D).with_exempt([0j], 0.1)
        assert not square.inside(np.array([-0.05 + 0.0j]))[0]
        assert square.contains_points(np.array([-0.05 + 0.0j]))[0]
        assert not square.contains_points(np.array([-0.5 + 0.0j]))[0]

    def test_complement(self):
        hull = DiskRegion(radius=0.5)
        ring = ComplementRegion(DiskRegion(), hull)
        assert ring.chart is Chart.D
        assert ring.inside(np.array([0.75]))[0]
        assert not ring.inside(np.array([0.25]))[0]

    def test_chart_mismatch(self):
        curve = CurvePath(np.array([1j, 2j]), Chart.H)
        with pytest.raises(GeometryError) as exc:
            region_contains(DiskRegion(), curve)
        assert exc.value.code is ErrorCode.CHART_MISMATCH

    def test_tube_neighborhood(self):
        curve = CurvePath(np.linspace(-0.5, 0.5, 11) + 0j, Chart.D, marked={"start": -0.5 + 0j, "end": 0.5 + 0j})
        tube = tube_neighborhood(curve, 0.1)
        assert tube.exempt == (-0.5 + 0j, 0.5 + 0j)
        assert tube.inside(np.array([0.05j]))[0]
        assert not tube.inside(np.array([0.3j]))[0]

    def test_geodesic_neighborhood(self):
        region = geodesic_neighborhood(0.3)
        pts = np.array([0, 0.5, -0.5, 0.1j, 0.9j])
        np.testing.assert_array_equal(region.contains_points(pts), [True, True, True, True, False])
        chord = hyperbolic_geodesic(-1, 1, 64)
        assert region_contains(region, chord)

    def test_keyhole(self):
        region = keyhole_neighborhood(0.2)
        pts = np.array([0, 0.5, 0.15j, 0.5 + 0.5j, -0.5])
        np.testing.assert_array_equal(region.contains_points(pts), [True, True, True, False, False])

    @pytest.mark.parametrize("eps", [0.0, 2.0])
    def test_neighborhood_parameter_range(self, eps):
        with pytest.raises(GeometryError):
            geodesic_neighborhood(eps)
        with pytest.raises(GeometryError):
            keyhole_neighborhood(eps)


class TestPushForward:
    def test_map_curve_moves_marked_points(self):
        curve = CurvePath(np.array([-1, 0, 1 + 0j]), Chart.D, marked={"start": -1, "end": 1})
        moved = map_curve(rotation(math.pi / 2), curve)
        np.testing.assert_allclose(moved.points, [-1j, 0, 1j], atol=1e-15)
        assert abs(moved.marked["end"] - 1j) < 1e-15

    def test_map_region(self):
        square = PolygonRegion(np.array([0, 0.5, 0.5 + 0.5j, 0.5j]), Chart.D).with_exempt([0j], 0.05)
        moved = map_region(rotation(math.pi), square)
        assert moved.inside(np.array([-0.25 - 0.25j]))[0]
        assert moved.exempt == (0j,)
