"""Conformal-deformation identity checks and Onsager–Machlup ratio experiments.

A deformation case bundles curves in a neighborhood A and a map f that is
conformal on A. The potentials of γ and f(γ) are computed independently
(both re-extracted by the inverse zipper) and compared against the log|f'|
terms plus the difference of Brownian loop masses, which is estimated on
one shared loop sample in 𝔻.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import stats

from .config import ToleranceConfig, worker_count
from .energies import (
    Case,
    F_functional,
    PotentialReport,
    chord_normalizer,
    chordal_potential,
    deformation_coefficients,
    exponents,
    forced_radial_potential,
    kernel,
    multichordal_potential,
    multiradial_potential,
    radial_potential,
    rho_potential,
)
from .errors import ErrorCode, GeometryError, HypothesisError, InputError, validate_kappa
from .geometry import (
    CAYLEY_H_TO_D,
    ComplementRegion,
    ConformalMap,
    DiskRegion,
    MapChain,
    PolygonRegion,
    Region,
    as_chain,
    chord_family_neighborhood,
    geodesic_neighborhood,
    hyperbolic_geodesic,
    keyhole_neighborhood,
    map_curve,
    map_region,
    mobius_from_points,
    polyline_self_intersects,
    polylines_intersect,
    radial_slit_capacity,
    radial_slit_radius,
    region_contains,
    rotation,
    tube_neighborhood,
)
from .loewner import extract_radial_driving, radial_forward
from .loopsoup import (
    CurveSet,
    LoopMassParams,
    Target,
    loop_mass_difference,
    loop_mass_two_sets,
    multi_cross_mass,
    target_gap,
)
from .models import (
    Chart,
    CurvePath,
    DrivingFunction,
    DrivingKind,
    Estimate,
    MarkedConfiguration,
    is_infinite,
)
from .rng import stream
from .sampler import SamplerConfig, sample_trace

logger = logging.getLogger("loewnerlab.verifier")

DEFORMATION_KINDS = ("chordal", "rho", "radial", "multi-radial")
OM_KINDS = ("chordal", "rho-chordal", "radial", "rho-radial", "multi-chordal", "multi-radial")

_CASES = {
    "chordal": Case.CHORDAL,
    "rho": Case.FORCED_CHORDAL,
    "radial": Case.RADIAL,
    "multi-radial": Case.MULTI_RADIAL,
    "multi-chordal": Case.MULTI_CHORDAL,
}

_CONFORMALITY_POINTS = 200
_CONFORMALITY_TOL = 1e-4
_SIGMAS = 3.0
_MULTI_RADIAL_INNER = 0.3


def log_term_coefficients(kind: str, n: int = 1, rho: float = 0.0, mu: float = 0.0) -> dict[str, float]:
    """Coefficients of log|f'| at the marked points, as written in the deformation identities."""
    if kind == "chordal":
        return {"x": 0.25, "y": 0.25}
    if kind == "rho":
        weight = (rho + 2) * (rho + 6) / 48
        return {"x": weight, "y": weight}
    if kind == "radial":
        return {"x": 0.25, "0": -0.125}
    if kind == "multi-radial":
        return {**{f"x{j + 1}": 0.25 for j in range(n)}, "0": (n * n - 4 - mu * mu) / 24}
    if kind == "multi-chordal":
        return {f"x{j + 1}": 0.25 for j in range(2 * n)}
    raise InputError(
        code=ErrorCode.INVALID_PARAMETER,
        message=f"unknown deformation kind: {kind}",
        details={"kind": kind},
    )


# ---------------------------------------------------------------------------
# Deformation cases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeformationCase:
    """
    Curves in a neighborhood A of their domain and a map f conformal on A.

    `region` is either a polygon A, or a ComplementRegion whose removed
    polygon is the hull D∖A.
    """

    kind: str
    curves: tuple[CurvePath, ...]
    config: MarkedConfiguration
    region: Region
    f: ConformalMap
    params: LoopMassParams = field(default_factory=LoopMassParams)
    tol: ToleranceConfig = field(default_factory=ToleranceConfig)
    clearance: float = 0.0
    seed: int = 20240601

    def __post_init__(self) -> None:
        if self.kind not in DEFORMATION_KINDS:
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message=f"unknown deformation kind: {self.kind}",
                details={"kind": self.kind, "choices": list(DEFORMATION_KINDS)},
            )
        if not self.curves:
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="a deformation case needs a curve")
        if self.kind != "multi-radial" and len(self.curves) != 1:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message=f"{self.kind} cases take exactly one curve",
                details={"curves": len(self.curves)},
            )
        if self.kind in ("radial", "multi-radial") and self.config.chart is not Chart.D:
            raise GeometryError(
                code=ErrorCode.CHART_MISMATCH,
                message="radial cases live in the unit disk",
                details={"chart": self.config.chart.value},
            )
        if self.kind == "rho" and self.config.rho is None:
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="rho cases need config.rho")
        charts = {c.chart for c in self.curves} | {self.region.chart}
        if charts != {self.config.chart}:
            raise GeometryError(
                code=ErrorCode.CHART_MISMATCH,
                message="curves, region and configuration must share one chart",
                details={"charts": sorted(c.value for c in charts)},
            )
        self.hull_polygon()

    @property
    def chain(self) -> MapChain:
        return as_chain(self.f)

    @property
    def case(self) -> Case:
        return _CASES[self.kind]

    def marked_points(self) -> dict[str, complex]:
        """Marked points by label ("0" is the interior target)."""
        b = self.config.boundary
        if self.kind == "multi-radial":
            return {**{f"x{j + 1}": z for j, z in enumerate(b)}, "0": 0j}
        if self.kind == "radial":
            return {"x": b[0], "0": 0j}
        return {"x": b[0], "y": b[1]}

    def coefficients(self) -> dict[str, float]:
        rho = self.config.rho or 0.0
        return log_term_coefficients(self.kind, len(self.curves), rho, self.config.mu)

    def image_config(self) -> MarkedConfiguration:
        chain = self.chain
        force = self.config.force_point
        return replace(
            self.config,
            boundary=tuple(chain.image(z) for z in self.config.boundary),
            force_point=None if force is None else chain.image(force),
        )

    def image_curves(self) -> tuple[CurvePath, ...]:
        return tuple(map_curve(self.chain, c) for c in self.curves)

    def hull_polygon(self) -> tuple[PolygonRegion, bool]:
        """(P, is_hull): D∖A is the inside of P when is_hull, else the outside."""
        region = self.region
        if isinstance(region, ComplementRegion) and isinstance(region.removed, PolygonRegion):
            return region.removed, True
        if isinstance(region, PolygonRegion):
            return region, False
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message="the neighborhood must be a polygon or a host minus a polygon",
            details={"region": type(region).__name__},
        )


def radial_slits(n: int, inner: float = 0.3, resolution: int = 128) -> tuple[CurvePath, ...]:
    """n straight slits from e^{2πij/n} to radius `inner`."""
    out = []
    for j in range(n):
        x = complex(np.exp(2j * math.pi * j / n))
        points = x * np.linspace(1.0, inner, resolution)
        out.append(CurvePath(points.astype(complex), Chart.D, None, {"start": x}))
    return tuple(out)


def disk_hull(center: complex, radius: float, resolution: int = 64) -> PolygonRegion:
    theta = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
    return PolygonRegion(center + radius * np.exp(1j * theta), Chart.D)


def standard_case(
    kind: str,
    f: ConformalMap,
    eps: float = 0.5,
    n: int = 2,
    rho: float | None = None,
    mu: float = 0.0,
    curves: Sequence[CurvePath] | None = None,
    params: LoopMassParams | None = None,
    tol: ToleranceConfig | None = None,
    clearance: float = 0.0,
    seed: int = 20240601,
) -> DeformationCase:
    """
    Default geometry of each kind, with optional replacement curves.

    chordal/rho: the diameter from −1 to 1 in its geodesic neighborhood.
    radial: the radius from 1 to 1e−3 in a keyhole. multi-radial: n slits
    from the n-th roots of unity to radius 0.3, with A the disk minus a
    small round hull between the first two slits.
    """
    params = params or LoopMassParams(seed=seed)
    tol = tol or ToleranceConfig()
    region: Region
    if kind in ("chordal", "rho"):
        config = MarkedConfiguration.chordal(-1, 1, chart=Chart.D, rho=rho if kind == "rho" else None)
        default: tuple[CurvePath, ...] = (hyperbolic_geodesic(-1 + 0j, 1 + 0j),)
        region = geodesic_neighborhood(eps)
    elif kind == "radial":
        config = MarkedConfiguration.radial([1 + 0j])
        default = (
            CurvePath(np.linspace(1.0, 1e-3, 256).astype(complex), Chart.D, None, {"start": 1 + 0j}),
        )
        region = keyhole_neighborhood(eps)
    else:
        default = radial_slits(n)
        config = MarkedConfiguration.radial([c.start for c in default], mu=mu)
        hull = disk_hull(0.6 * np.exp(1j * math.pi / n), 0.15)
        region = ComplementRegion(DiskRegion(), hull, config.boundary, tol.marked_radius)
    return DeformationCase(
        kind,
        tuple(curves) if curves else default,
        config,
        region,
        f,
        params,
        tol,
        clearance,
        seed,
    )


def _disk_polygon(polygon: PolygonRegion) -> PolygonRegion:
    if polygon.chart is Chart.D:
        return polygon
    return map_region(CAYLEY_H_TO_D, polygon, Chart.D)


def _disk_curve(curve: CurvePath) -> CurvePath:
    if curve.chart is Chart.D:
        return curve
    return map_curve(CAYLEY_H_TO_D, curve, Chart.D)


def _loop_targets(case: DeformationCase) -> tuple[tuple[Target, Target], tuple[Target, Target]]:
    """(γ, D∖A) and (f(γ), D∖f(A)) moved to 𝔻 for the loop estimator."""
    polygon, is_hull = case.hull_polygon()
    image_polygon = map_region(case.chain, polygon)

    def removed(p: PolygonRegion) -> Region:
        disk = _disk_polygon(p)
        return disk if is_hull else ComplementRegion(DiskRegion(), disk)

    def target(curves: Sequence[CurvePath]) -> Target:
        moved = tuple(_disk_curve(c) for c in curves)
        return moved[0] if len(moved) == 1 else CurveSet(moved)

    return (
        (target(case.curves), removed(polygon)),
        (target(case.image_curves()), removed(image_polygon)),
    )


# ---------------------------------------------------------------------------
# Hypotheses
# ---------------------------------------------------------------------------


def _violation(message: str, **details: Any) -> HypothesisError:
    return HypothesisError(code=ErrorCode.HYPOTHESIS_VIOLATION, message=message, details=details)


def _on_boundary(w: np.ndarray, chart: Chart, tol: float) -> np.ndarray:
    if chart is Chart.D:
        return np.abs(np.abs(w) - 1.0) <= tol
    return np.abs(w.imag) <= tol * np.maximum(1.0, np.abs(w))


def _in_closed_host(w: np.ndarray, chart: Chart, tol: float) -> np.ndarray:
    if chart is Chart.D:
        return np.abs(w) <= 1.0 + tol
    return w.imag >= -tol


def _sample_box(case: DeformationCase) -> tuple[float, float, float, float]:
    box = case.region.bounding_box()
    if box is not None:
        return box
    points = np.concatenate([c.points[np.isfinite(c.points)] for c in case.curves])
    pad = 1.0 + float(np.ptp(points.real) + np.ptp(points.imag))
    return (
        float(points.real.min() - pad),
        float(points.real.max() + pad),
        0.0,
        float(points.imag.max() + pad),
    )


def conformality_points(case: DeformationCase, count: int = _CONFORMALITY_POINTS) -> np.ndarray:
    """Points of A away from the exempt disks, drawn by rejection from its bounding box."""
    rng = stream(case.seed, "conformality")
    x0, x1, y0, y1 = _sample_box(case)
    found: list[np.ndarray] = []
    total = 0
    for _ in range(64):
        z = rng.uniform(x0, x1, 4 * count) + 1j * rng.uniform(y0, y1, 4 * count)
        keep = z[case.region.inside(z) & ~case.region.near_exempt(z)]
        found.append(keep)
        total += keep.size
        if total >= count:
            break
    points = np.concatenate(found)[:count]
    if points.size == 0:
        raise _violation("could not sample points inside the neighborhood")
    return points


def check_hypotheses(case: DeformationCase) -> dict[str, float]:
    """
    Validate a case before any computation.

    Checks that the curves lie in A with the required clearance, that f is
    conformal at sampled points of A, that f keeps the marked points (and
    the boundary next to them) on the boundary, that f fixes the interior
    target and that f(A) stays in the closed domain.

    Raises:
        HypothesisError: On the first violated hypothesis.
    """
    chart = case.config.chart
    tol = case.tol
    for index, curve in enumerate(case.curves):
        if not region_contains(case.region, curve, case.clearance):
            raise _violation("curve leaves the neighborhood", curve=index, clearance=case.clearance)

    chain = case.chain
    residual = _conformal_on(chain, conformality_points(case), tol)

    radius = (case.region.exempt_radius or tol.marked_radius) / 2
    _check_marked_points(chain, case.marked_points(), chart, radius, tol)

    polygon, _ = case.hull_polygon()
    image = chain.evaluate(polygon.boundary)
    if not np.all(_in_closed_host(image, chart, 10 * tol.geometric)):
        raise _violation("image of the neighborhood leaves the domain")
    _check_simple_images(case.image_curves())
    return {"conformality_residual": residual, "sample_radius": radius}


def _check_marked_points(
    chain: MapChain, marked: dict[str, complex], chart: Chart, radius: float, tol: ToleranceConfig
) -> None:
    """f fixes the interior target and keeps the boundary on both sides of each marked point."""
    boundary_tol = 10 * tol.geometric
    for label, z in marked.items():
        if label == "0":
            if abs(chain.image(z)) > tol.geometric:
                raise _violation("map must fix the interior target 0", image=chain.image(z))
            continue
        if is_infinite(z):
            continue
        if chart is Chart.D:
            samples = z * np.exp(1j * np.array([-radius, 0.0, radius]))
        else:
            samples = z + np.array([-radius, 0.0, radius])
        images = chain.evaluate(samples.astype(complex))
        if not np.all(_on_boundary(images, chart, boundary_tol)):
            raise _violation(
                "map does not keep the boundary near a marked point", label=label, point=z
            )


def _check_simple_images(curves: Sequence[CurvePath]) -> None:
    for index, curve in enumerate(curves):
        finite = curve.points[np.isfinite(curve.points)]
        if polyline_self_intersects(finite):
            raise _violation("image curve is not simple", curve=index)


def _conformal_on(chain: MapChain, points: np.ndarray, tol: ToleranceConfig) -> float:
    try:
        residual = chain.cauchy_riemann_residual(points)
    except (GeometryError, FloatingPointError) as exc:
        raise _violation("map cannot be evaluated on the neighborhood") from exc
    if not residual <= _CONFORMALITY_TOL:
        raise _violation("map is not conformal on the neighborhood", residual=residual)
    if np.any(np.abs(chain.derivative(points)) < tol.algebraic):
        raise _violation("map derivative vanishes in the neighborhood")
    return residual


# ---------------------------------------------------------------------------
# Identity reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentityReport:
    """Both sides of a deformation identity; discrepancy = lhs − rhs."""

    kind: str
    lhs: float
    log_term: float
    loop_difference: Estimate
    tolerance: float
    before: PotentialReport
    after: PotentialReport
    coefficients: dict[str, float]
    log_derivatives: dict[str, float]
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return self.log_term + self.loop_difference.mean

    @property
    def discrepancy(self) -> float:
        return self.lhs - self.rhs

    @property
    def stderr(self) -> float:
        return self.loop_difference.stderr

    @property
    def passed(self) -> bool:
        return abs(self.discrepancy) <= _SIGMAS * self.stderr + self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "log_term": self.log_term,
            "loop_difference": self.loop_difference.to_dict(),
            "discrepancy": self.discrepancy,
            "stderr": self.stderr,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "coefficients": dict(self.coefficients),
            "log_derivatives": dict(self.log_derivatives),
            "before": self.before.to_dict(),
            "after": self.after.to_dict(),
            "diagnostics": dict(self.diagnostics),
        }


def _potential(kind: str, curves: Sequence[CurvePath], config: MarkedConfiguration, tol: ToleranceConfig) -> PotentialReport:
    if kind == "chordal":
        return chordal_potential(curves[0], config, tol=tol)
    if kind == "rho":
        return rho_potential(curves[0], config, tol=tol)
    if kind == "radial":
        return radial_potential(curves[0])
    drivings = [extract_radial_driving(c) for c in curves]
    return multiradial_potential(drivings, config, config.mu)


def _verify(case: DeformationCase) -> IdentityReport:
    diagnostics = check_hypotheses(case)
    image_config = case.image_config()
    image_curves = case.image_curves()
    first, second = _loop_targets(case)
    workers = min(3, worker_count(case.params.workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        before = pool.submit(_potential, case.kind, case.curves, case.config, case.tol)
        after = pool.submit(_potential, case.kind, image_curves, image_config, case.tol)
        loops = pool.submit(
            loop_mass_difference, first, second, DiskRegion(), case.params, ("deform", case.kind)
        )
        before_report, after_report, loop = before.result(), after.result(), loops.result()

    chain = case.chain
    logs = {label: math.log(chain.abs_derivative(z)) for label, z in case.marked_points().items()}
    coefficients = case.coefficients()
    log_term = sum(coefficients[label] * logs[label] for label in coefficients)
    report = IdentityReport(
        case.kind,
        after_report.total - before_report.total,
        log_term,
        loop,
        case.tol.deterministic,
        before_report,
        after_report,
        coefficients,
        logs,
        {**diagnostics, "truncated": before_report.truncated or after_report.truncated},
    )
    logger.info(
        "Verified deformation identity",
        extra={
            "kind": case.kind,
            "discrepancy": report.discrepancy,
            "stderr": report.stderr,
            "passed": report.passed,
        },
    )
    return report


def _require(case: DeformationCase, kind: str) -> None:
    if case.kind != kind:
        raise InputError(
            code=ErrorCode.INVALID_PARAMETER,
            message=f"expected a {kind} case",
            details={"kind": case.kind},
        )


def verify_chordal_deformation(case: DeformationCase) -> IdentityReport:
    """𝓗(f(γ)) − 𝓗(γ) against ¼ log|f'(x)f'(y)| + 𝔅(γ, D∖A) − 𝔅(f(γ), D∖f(A))."""
    _require(case, "chordal")
    return _verify(case)


def verify_rho_deformation(case: DeformationCase) -> IdentityReport:
    """Forced version: the log coefficient becomes (ρ+2)(ρ+6)/48 at both endpoints."""
    _require(case, "rho")
    return _verify(case)


def verify_radial_deformation(case: DeformationCase) -> IdentityReport:
    """Radial version with ¼ log|f'(x)| − ⅛ log|f'(0)|."""
    _require(case, "radial")
    return _verify(case)


def verify_multiradial_deformation(case: DeformationCase) -> IdentityReport:
    """Multi-radial version with ¼ Σ log|f'(x_j)| + ((n² − 4 − μ²)/24) log|f'(0)|."""
    _require(case, "multi-radial")
    return _verify(case)


def verify_deformation(case: DeformationCase) -> IdentityReport:
    return {
        "chordal": verify_chordal_deformation,
        "rho": verify_rho_deformation,
        "radial": verify_radial_deformation,
        "multi-radial": verify_multiradial_deformation,
    }[case.kind](case)


# ---------------------------------------------------------------------------
# Exponent checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckRow:
    name: str
    value: float
    expected: float
    tolerance: float

    @property
    def error(self) -> float:
        return abs(self.value - self.expected)

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "value": self.value,
            "expected": self.expected,
            "error": self.error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class CheckReport:
    title: str
    rows: tuple[CheckRow, ...]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def to_dict(self) -> dict[str, Any]:
        return {
            "title": self.title,
            "passed": self.passed,
            "rows": [row.to_dict() for row in self.rows],
        }


_EXPONENT_CASES: tuple[tuple[str, dict[str, float]], ...] = (
    ("chordal", {}),
    ("rho", {"rho": 0.0}),
    ("rho", {"rho": 1.0}),
    ("rho", {"rho": -1.5}),
    ("radial", {}),
    ("multi-radial", {"n": 2, "mu": 0.0}),
    ("multi-radial", {"n": 3, "mu": 0.5}),
    ("multi-chordal", {"n": 2}),
)


def verify_restriction_exponents(
    kappa: float = 1e-8, tolerance: float = 1e-6, scaled_kappa: float = 1e-6
) -> CheckReport:
    """
    e(j) = lim −2 b_κ(j)/c(κ) evaluated at small κ against the deformation coefficients.

    Also checks the ρ pair sum −2α/c → (ρ+2)(ρ+6)/24 and κ·e_κ(j) → 0.
    """
    rows: list[CheckRow] = []
    for kind, extra in _EXPONENT_CASES:
        n = int(extra.get("n", 1))
        rho = float(extra.get("rho", 0.0))
        mu = float(extra.get("mu", 0.0))
        table = exponents(kappa, rho, n, mu)
        case = _CASES[kind]
        expected = log_term_coefficients(kind, n, rho, mu)
        tag = ",".join(f"{k}={v:g}" for k, v in extra.items())
        prefix = f"{kind}[{tag}]" if tag else kind
        for label, weight in table.weights(case).items():
            rows.append(CheckRow(f"{prefix} e({label})", -2 * weight / table.c, expected[label], tolerance))
        scaled = exponents(scaled_kappa, rho, n, mu)
        decade = exponents(10 * scaled_kappa, rho, n, mu).corrected_weights(case)
        for label, weight in scaled.corrected_weights(case).items():
            rows.append(CheckRow(f"{prefix} κ·e_κ({label})", scaled_kappa * weight, 0.0, 1e-4))
            if abs(weight) > 1e-9:
                ratio = 10 * decade[label] / weight
                rows.append(CheckRow(f"{prefix} κ·e_κ({label}) decade ratio", ratio, 10.0, 1e-3))
        if kind == "rho":
            pair = (rho + 2) * (rho + 6) / 24
            rows.append(CheckRow(f"{prefix} pair −2α/c", -2 * table.alpha / table.c, pair, tolerance))
            rows.append(CheckRow(f"{prefix} pair = 2·point", 2 * expected["x"], pair, 1e-12))
    logger.debug("Checked restriction exponents", extra={"rows": len(rows), "kappa": kappa})
    return CheckReport("restriction exponents", tuple(rows))


def coefficient_cross_check(kappa: float = 2.0, tolerance: float = 1e-12) -> CheckReport:
    """Hand-written deformation coefficients against the exponent-table limits."""
    rows: list[CheckRow] = []
    for kind, extra in _EXPONENT_CASES:
        n = int(extra.get("n", 1))
        rho = float(extra.get("rho", 0.0))
        mu = float(extra.get("mu", 0.0))
        limits = deformation_coefficients(_CASES[kind], exponents(kappa, rho, n, mu))
        for label, value in log_term_coefficients(kind, n, rho, mu).items():
            rows.append(CheckRow(f"{kind} {label} {extra}", value, limits[label], tolerance))
    return CheckReport("coefficient cross-check", tuple(rows))


def radial_normalization_check(
    drivings: Sequence[DrivingFunction] = (),
    kappas: Sequence[float] = (0.5, 1.0, 2.0, 8 / 3, 4.0),
    samples: int = 64,
    seed: int = 0,
    tolerance: float = 1e-12,
) -> CheckReport:
    """
    F = 0 for radial deformations normalized by |f'(0) f'(1)⁶| = 1.

    Both the table-driven F and the explicit −3(6−κ)/16·L₁ − (6−κ)/32·L₀
    are checked on random pairs with L₀ = −6 L₁. Each driving adds a row
    comparing g_T'(0) with e^T and the conformal radius with e^{−T}.
    """
    rng = stream(seed, "radial-normalization")
    rows: list[CheckRow] = []
    for kappa in kappas:
        table = exponents(kappa)
        l1 = rng.uniform(-2.0, 2.0, samples)
        l0 = -6.0 * l1
        table_f = [F_functional(Case.RADIAL, table, {"x": a, "0": b}) for a, b in zip(l1, l0, strict=True)]
        explicit = -3 * (6 - kappa) / 16 * l1 - (6 - kappa) / 32 * l0
        rows.append(CheckRow(f"κ={kappa:g} F(normalized)", float(np.max(np.abs(table_f))), 0.0, tolerance))
        rows.append(CheckRow(f"κ={kappa:g} explicit", float(np.max(np.abs(explicit))), 0.0, tolerance))
    for index, driving in enumerate(drivings):
        if driving.kind is not DrivingKind.RADIAL:
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="radial drivings expected")
        _, derivative = radial_forward(driving, 0j, derivative=True)
        horizon = driving.horizon
        rows.append(
            CheckRow(f"driving {index} log g'(0)", math.log(abs(derivative)), horizon, 1e-8 * max(1.0, horizon))
        )
        radius = 1.0 / abs(derivative)
        rows.append(CheckRow(f"driving {index} conformal radius", radius, math.exp(-horizon), 1e-8))
    return CheckReport("radial normalization", tuple(rows))


# ---------------------------------------------------------------------------
# Uniform convergence
# ---------------------------------------------------------------------------


def perturbed_curves(
    curve: CurvePath, amplitude: float, count: int, rng: np.random.Generator
) -> list[CurvePath]:
    """Normal bumps of the curve vanishing at both endpoints."""
    points = np.asarray(curve.points, dtype=complex)
    arc = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(points)))])
    u = arc / arc[-1]
    tangent = np.gradient(points)
    normal = 1j * tangent / np.maximum(np.abs(tangent), 1e-300)
    out = []
    for _ in range(count):
        mode = int(rng.integers(1, 4))
        phase = float(rng.uniform(0.0, math.pi))
        size = amplitude * float(rng.uniform(0.25, 1.0)) * float(rng.choice([-1.0, 1.0]))
        bump = size * np.sin(math.pi * u) * np.sin(mode * math.pi * u + phase)
        out.append(CurvePath(points + bump * normal, curve.chart, None, dict(curve.marked)))
    return out


@dataclass(frozen=True)
class BracketPoint:
    eps: float
    lower: float
    upper: float
    reference: float
    stderr: float
    n_curves: int

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
            "reference": self.reference,
            "stderr": self.stderr,
            "n_curves": self.n_curves,
        }


@dataclass(frozen=True)
class BracketReport:
    points: tuple[BracketPoint, ...]
    sigmas: float = 2.0

    @property
    def monotone(self) -> bool:
        """Widths shrink along the ε-grid up to `sigmas` standard errors."""
        noise = max((p.stderr for p in self.points), default=0.0)
        return all(
            later.width <= earlier.width + self.sigmas * noise
            for earlier, later in zip(self.points, self.points[1:])
        )

    def to_dict(self) -> dict[str, Any]:
        return {"monotone": self.monotone, "points": [p.to_dict() for p in self.points]}


def uniform_convergence_bracket(
    curve: CurvePath,
    region: PolygonRegion,
    family: Callable[[float], Region],
    eps_grid: Sequence[float],
    params: LoopMassParams | None = None,
    n_curves: int = 8,
    amplitude: float = 0.4,
    seed: int = 20240601,
) -> BracketReport:
    """
    Range of 𝔅(η, 𝔻∖A; 𝔻) over sampled η ⊂ A_ε, for each ε of a decreasing grid.

    Every estimate uses the same loops (one duration window for all curves),
    so the bracket width measures the spread over η and not sampling noise.

    Raises:
        GeometryError: For curves or regions outside the disk chart.
    """
    if curve.chart is not Chart.D or region.chart is not Chart.D:
        raise GeometryError(code=ErrorCode.CHART_MISMATCH, message="brackets are computed in the disk")
    params = params or LoopMassParams()
    removed = ComplementRegion(DiskRegion(), region)
    families: list[tuple[float, list[CurvePath]]] = []
    for index, eps in enumerate(eps_grid):
        neighborhood = family(eps)
        candidates = perturbed_curves(curve, amplitude * eps, n_curves, stream(seed, "bracket", index))
        kept = [c for c in candidates if region_contains(neighborhood, c)]
        families.append((float(eps), [curve, *kept]))
    gap = min(target_gap(c, removed) for _, curves in families for c in curves)
    shared = replace(params, t_min=(gap / params.t_min_divisor) ** 2)

    def mass(c: CurvePath) -> Estimate:
        return loop_mass_two_sets(c, removed, DiskRegion(), shared, labels=("bracket",))

    reference = mass(curve)
    points = []
    for eps, curves in families:
        estimates = [reference, *(mass(c) for c in curves[1:])]
        means = [e.mean for e in estimates]
        points.append(
            BracketPoint(
                eps,
                min(means),
                max(means),
                reference.mean,
                max(e.stderr for e in estimates),
                len(curves),
            )
        )
        logger.debug(
            "Bracketed loop mass",
            extra={"eps": eps, "n_curves": len(curves), "width": max(means) - min(means)},
        )
    return BracketReport(tuple(points))


# ---------------------------------------------------------------------------
# Onsager–Machlup ratios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OMCase:
    """
    Ratio experiment Q(O_ε(f(γ₀)))/Q(O_ε(γ₀)) over a decreasing ε-grid.

    γ₀ is the reference curve of the kind: the geodesic chord of (𝔻; −1, 1),
    the SLE₀(ρ) chord, the radius toward 0, the radial SLE₀(ρ) trace, n
    geodesic chords joining adjacent pairs of 2n equally spaced boundary
    points, or n radial slits from the n-th roots of unity.

    The multi kinds sample n independent single curves and weight them by
    exp((c/2)·multi-cross loop mass) on the event that they stay disjoint.
    """

    kind: str
    f: ConformalMap
    kappa: float
    eps_grid: tuple[float, ...]
    rho: float | None = None
    n_paths: int = 10_000
    steps: int = 200
    horizon: float | None = None
    seed: int = 20240601
    clearance: float = 0.0
    bias_scale: float = 1.0
    resolution: int = 256
    workers: int | None = None
    n: int = 2
    loop_params: LoopMassParams | None = None
    tol: ToleranceConfig = field(default_factory=ToleranceConfig)

    def __post_init__(self) -> None:
        if self.kind not in OM_KINDS:
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message=f"unknown ratio experiment: {self.kind}",
                details={"kind": self.kind, "choices": list(OM_KINDS)},
            )
        validate_kappa(self.kappa)
        if self.forced and self.rho is None:
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message=f"{self.kind} needs rho")
        if self.multi and self.n < 2:
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message="multi-curve ratio experiments need n >= 2",
                details={"n": self.n},
            )
        if not self.eps_grid:
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="eps_grid is empty")

    @property
    def radial(self) -> bool:
        return self.kind in ("radial", "rho-radial", "multi-radial")

    @property
    def forced(self) -> bool:
        return self.kind in ("rho-chordal", "rho-radial")

    @property
    def multi(self) -> bool:
        return self.kind.startswith("multi")

    @property
    def loop_mass_params(self) -> LoopMassParams:
        return self.loop_params or LoopMassParams(n_samples=4096, seed=self.seed)

    @property
    def trace_horizon(self) -> float:
        if self.horizon is not None:
            return self.horizon
        if self.kind == "multi-radial":
            return radial_slit_capacity(_MULTI_RADIAL_INNER)
        return 4.0 if self.radial else 16.0


@dataclass(frozen=True)
class OMPoint:
    eps: float
    log_ratio: float
    stderr: float
    target: float
    allowance: float
    stay_base: float
    stay_image: float

    @property
    def gap(self) -> float:
        return self.log_ratio - self.target

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.log_ratio):
            return False
        return abs(self.gap) <= _SIGMAS * self.stderr + self.allowance

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "log_ratio": self.log_ratio,
            "stderr": self.stderr,
            "target": self.target,
            "gap": self.gap,
            "allowance": self.allowance,
            "stay_base": self.stay_base,
            "stay_image": self.stay_image,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class OMReport:
    kind: str
    kappa: float
    delta_potential: float
    F: float
    kernel_log_ratio: float
    points: tuple[OMPoint, ...]
    trend: dict[str, float] | None

    @property
    def target(self) -> float:
        return self.points[0].target

    @property
    def trend_ok(self) -> bool:
        """|gap| is not significantly growing as ε shrinks."""
        if self.trend is None:
            return True
        return self.trend["slope"] >= -2 * self.trend["stderr"]

    @property
    def passed(self) -> bool:
        return self.points[-1].passed and self.trend_ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "kappa": self.kappa,
            "target": self.target,
            "delta_potential": self.delta_potential,
            "F": self.F,
            "kernel_log_ratio": self.kernel_log_ratio,
            "trend": self.trend,
            "trend_ok": self.trend_ok,
            "passed": self.passed,
            "points": [p.to_dict() for p in self.points],
        }


def ray_chord(theta: float, resolution: int = 256) -> CurvePath:
    """The ray at angle θ from 0 in ℍ, carried to a chord of (𝔻; −1, 1)."""
    r = np.geomspace(1e-3, 1e3, max(resolution - 2, 2))
    inner = CAYLEY_H_TO_D.evaluate(r * np.exp(1j * theta))
    points = np.concatenate([[-1 + 0j], inner, [1 + 0j]])
    return CurvePath(points, Chart.D, None, {"start": -1 + 0j, "end": 1 + 0j})




def _paired_log_ratio(image: np.ndarray, base: np.ndarray) -> tuple[float, float, float, float]:
    """log(p̂₁/p̂₀) with a delta-method standard error that keeps the pairing."""
    p1, p0 = float(image.mean()), float(base.mean())
    if p1 == 0 or p0 == 0:
        return math.nan, math.inf, p0, p1
    d = image / p1 - base / p0
    stderr = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else math.inf
    return math.log(p1 / p0), stderr, p0, p1




@dataclass(frozen=True)
class _Reference:
    """Reference curves, their configuration, one single-curve configuration per curve."""

    case: Case
    curves: tuple[CurvePath, ...]
    config: MarkedConfiguration
    singles: tuple[MarkedConfiguration, ...]
    # polygon neighborhoods per curve; None means ε-tubes around each curve
    family: Callable[[float], tuple[PolygonRegion, ...]] | None = None

    def marked_points(self) -> dict[str, complex]:
        points = self.config.boundary
        if self.case in (Case.CHORDAL, Case.FORCED_CHORDAL):
            return {"x": points[0], "y": points[1]}
        if self.case in (Case.MULTI_CHORDAL, Case.MULTI_RADIAL):
            marked = {f"x{j + 1}": z for j, z in enumerate(points)}
        else:
            marked = {"x": points[0]}
        if self.case.is_radial:
            marked["0"] = 0j
        return marked


def _multichordal_reference(case: OMCase) -> _Reference:
    theta = math.pi / (2 * case.n) + math.pi * np.arange(2 * case.n) / case.n
    points = tuple(complex(np.exp(1j * t)) for t in theta)
    links = tuple((2 * j, 2 * j + 1) for j in range(case.n))
    diameter = hyperbolic_geodesic(-1 + 0j, 1 + 0j, case.resolution)
    maps, curves, singles = [], [], []
    for a, b in links:
        # φ(i) sits on the arc away from the chord so cyclic order is kept
        mid = theta[b] + ((theta[a] - theta[b]) % (2 * math.pi)) / 2
        phi = mobius_from_points((-1 + 0j, 1 + 0j, 1j), (points[a], points[b], complex(np.exp(1j * mid))))
        maps.append(phi)
        curves.append(map_curve(phi, diameter))
        singles.append(MarkedConfiguration.chordal(points[a], points[b], chart=Chart.D, kappa=case.kappa))
    config = MarkedConfiguration(Chart.D, points, links=links, kappa=case.kappa)

    def family(eps: float) -> tuple[PolygonRegion, ...]:
        return tuple(map_region(phi, geodesic_neighborhood(eps)) for phi in maps)

    return _Reference(Case.MULTI_CHORDAL, tuple(curves), config, tuple(singles), family)


def _reference(case: OMCase) -> _Reference:
    kappa = case.kappa
    if case.kind == "radial":
        segment = CurvePath(
            np.linspace(1.0, 1e-3, case.resolution).astype(complex), Chart.D, None, {"start": 1 + 0j}
        )
        config = MarkedConfiguration.radial([1 + 0j], kappa=kappa)
        return _Reference(Case.RADIAL, (segment,), config, (config,), lambda eps: (keyhole_neighborhood(eps),))
    if case.kind == "rho-radial":
        flat = SamplerConfig(
            kappa=0.0,
            rho=case.rho,
            kind=DrivingKind.RADIAL,
            horizon=case.trace_horizon,
            steps=case.steps,
            seed=case.seed,
        )
        config = MarkedConfiguration.radial([1 + 0j], kappa=kappa, rho=case.rho)
        return _Reference(Case.FORCED_RADIAL, (sample_trace(flat).curve,), config, (config,))
    if case.kind == "multi-radial":
        slits = radial_slits(case.n, radial_slit_radius(case.trace_horizon), case.resolution)
        config = MarkedConfiguration.radial([c.start for c in slits], kappa=kappa)
        singles = tuple(MarkedConfiguration.radial([c.start], kappa=kappa) for c in slits)
        return _Reference(Case.MULTI_RADIAL, slits, config, singles)
    if case.kind == "multi-chordal":
        return _multichordal_reference(case)
    config = MarkedConfiguration.chordal(-1, 1, chart=Chart.D, kappa=kappa, rho=case.rho)
    if case.kind == "chordal":
        chord = hyperbolic_geodesic(-1 + 0j, 1 + 0j, case.resolution)
        return _Reference(Case.CHORDAL, (chord,), config, (config,), lambda eps: (geodesic_neighborhood(eps),))
    flat = SamplerConfig(kappa=0.0, rho=case.rho, steps=case.steps, horizon=1.0, seed=case.seed)
    chord = ray_chord(float(np.angle(sample_trace(flat).curve.tip)), case.resolution)
    return _Reference(
        Case.FORCED_CHORDAL, (chord,), config, (config,), lambda eps: (chord_family_neighborhood(chord, eps),)
    )


def _om_potential(case: OMCase, curves: Sequence[CurvePath], config: MarkedConfiguration) -> float:
    if case.kind == "chordal":
        return chordal_potential(curves[0], config, tol=case.tol).total
    if case.kind == "rho-chordal":
        return rho_potential(curves[0], config, tol=case.tol).total
    if case.kind == "radial":
        return radial_potential(curves[0]).total
    if case.kind == "rho-radial":
        return forced_radial_potential(curves[0], float(case.rho or 0.0)).total
    if case.kind == "multi-chordal":
        return multichordal_potential(curves, config, case.loop_mass_params).total
    return multiradial_potential([extract_radial_driving(c) for c in curves], config, 0.0).total


def _check_tubes(chain: MapChain, reference: _Reference, eps: float, tol: ToleranceConfig) -> None:
    """Conformality on the ε-tubes, the marked points kept, simple images."""
    points = np.concatenate([c.points for c in reference.curves])
    offsets = eps / 2 * np.exp(0.5j * math.pi * np.arange(4))
    cloud = np.concatenate([points, (points[:, None] + offsets[None, :]).ravel()])
    cloud = cloud[np.abs(cloud) < 1 - tol.marked_radius]
    _conformal_on(chain, cloud, tol)
    _check_marked_points(chain, reference.marked_points(), Chart.D, tol.marked_radius / 2, tol)
    _check_simple_images(tuple(map_curve(chain, c) for c in reference.curves))


def _disjoint_tilt(curves: Sequence[CurvePath], c: float, params: LoopMassParams) -> float:
    """1{pairwise disjoint}·exp((c/2)·multi-cross mass) of placed curves."""
    finite = [curve.points[np.isfinite(curve.points)] for curve in curves]
    for a in range(len(finite)):
        for b in range(a + 1, len(finite)):
            if polylines_intersect(finite[a], finite[b]):
                return 0.0
    try:
        mass = multi_cross_mass(curves, DiskRegion(), params, labels=("tilt",)).mean
    except GeometryError as exc:
        if exc.code is ErrorCode.INTERSECTING_CURVES:
            return 0.0
        raise
    return math.exp(c / 2 * mass)


def _placements(case: OMCase, singles: Sequence[MarkedConfiguration]) -> tuple[ConformalMap, ...]:
    """Maps carrying a sampled trace onto each single-curve configuration."""
    if case.radial:
        return tuple(rotation(float(np.angle(s.boundary[0]))) for s in singles)
    return tuple(chord_normalizer(s).inverse() for s in singles)


def om_ratio_experiment(case: OMCase) -> OMReport:
    """
    Empirical log Q(O_ε(γ))/Q(O_ε(γ₀)) against (c/2)Δ𝓗 + F for each ε.

    Both sides use the same sampled traces: chordal traces in (ℍ; 0, ∞) are
    carried to each chord by its normalizer, radial traces are rotated onto
    each start point. The multi kinds draw one trace per curve and weight
    the event by the disjointness tilt on a loop sample shared by all paths.

    Raises:
        HypothesisError: If f breaks the marked-point agreement on some A_ε.
    """
    chain = as_chain(case.f)
    reference = _reference(case)
    image_curves = tuple(map_curve(chain, c) for c in reference.curves)

    def moved(config: MarkedConfiguration) -> MarkedConfiguration:
        return replace(config, boundary=tuple(chain.image(z) for z in config.boundary))

    config1 = moved(reference.config)
    singles = (reference.singles, tuple(moved(s) for s in reference.singles))

    regions: list[tuple[tuple[Region, ...], tuple[Region, ...]]] = []
    for eps in case.eps_grid:
        if reference.family is None:
            _check_tubes(chain, reference, eps, case.tol)
            bases: tuple[Region, ...] = tuple(tube_neighborhood(c, eps) for c in reference.curves)
            images: tuple[Region, ...] = tuple(tube_neighborhood(c, eps) for c in image_curves)
        else:
            polygons = reference.family(eps)
            for curve, single, polygon in zip(reference.curves, reference.singles, polygons, strict=True):
                link_case = DeformationCase(
                    "radial" if case.radial else "chordal",
                    (curve,),
                    single,
                    polygon,
                    chain,
                    tol=case.tol,
                    clearance=case.clearance,
                    seed=case.seed,
                )
                check_hypotheses(link_case)
            bases = polygons
            images = tuple(map_region(chain, r) for r in polygons)
        regions.append((bases, images))

    table = exponents(case.kappa, case.rho if case.forced else None, n=case.n if case.multi else None)
    logs = {label: math.log(chain.abs_derivative(z)) for label, z in reference.marked_points().items()}
    kernel_log_ratio = sum(
        math.log(kernel(image)) - math.log(kernel(base)) for base, image in zip(*singles, strict=True)
    )
    transforms = (_placements(case, singles[0]), _placements(case, singles[1]))
    sampler = SamplerConfig(
        kappa=case.kappa,
        rho=case.rho if case.forced else None,
        kind=DrivingKind.RADIAL if case.radial else DrivingKind.CHORDAL,
        horizon=case.trace_horizon,
        steps=case.steps,
        seed=case.seed,
        n_paths=case.n_paths,
        workers=case.workers,
    )

    delta = _om_potential(case, image_curves, config1) - _om_potential(case, reference.curves, reference.config)
    F = F_functional(reference.case, table, logs)
    target = table.c / 2 * delta + F
    m = len(reference.curves)
    loop_params = case.loop_mass_params

    def weights(index: int) -> np.ndarray:
        traces = [sample_trace(sampler, index * m + j).curve for j in range(m)]
        out = np.zeros((len(regions), 2))
        for side in (0, 1):
            placed = [map_curve(t, trace, Chart.D) for t, trace in zip(transforms[side], traces, strict=True)]
            hits = np.array(
                [
                    all(region_contains(r, p, case.clearance) for r, p in zip(pair[side], placed, strict=True))
                    for pair in regions
                ],
                dtype=float,
            )
            if case.multi and hits.any():
                hits *= _disjoint_tilt(placed, table.c, loop_params)
            out[:, side] = hits
        return out

    with ThreadPoolExecutor(max_workers=worker_count(case.workers)) as pool:
        stays = np.array(list(pool.map(weights, range(case.n_paths))), dtype=float)

    points = []
    for k, eps in enumerate(case.eps_grid):
        log_ratio, stderr, p0, p1 = _paired_log_ratio(stays[:, k, 1], stays[:, k, 0])
        points.append(
            OMPoint(
                float(eps),
                log_ratio + kernel_log_ratio,
                stderr,
                target,
                case.bias_scale * float(eps),
                p0,
                p1,
            )
        )
        if not math.isfinite(log_ratio):
            logger.warning("No sampled trace stayed in the neighborhood", extra={"eps": eps})

    trend = None
    finite = [p for p in points if math.isfinite(p.log_ratio)]
    if len(finite) >= 3:
        fit = stats.linregress([p.eps for p in finite], [abs(p.gap) for p in finite])
        trend = {"slope": float(fit.slope), "intercept": float(fit.intercept), "stderr": float(fit.stderr)}
    report = OMReport(case.kind, case.kappa, delta, F, kernel_log_ratio, tuple(points), trend)
    logger.info(
        "Ran ratio experiment",
        extra={"kind": case.kind, "n_paths": case.n_paths, "target": target, "passed": report.passed},
    )
    return report
