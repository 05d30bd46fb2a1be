"""Chordal and radial Loewner evolution.

Forward maps integrate the Loewner equations with RK4. Traces and driving
extraction use the zipper: a trace is built by composing elementary slit
maps in reverse, and a curve is unzipped one vertex at a time.

Chordal:  ∂g = 2 / (g − W),                g_t(z) = z + 2t/z + O(z^{-2})
Radial:   ∂g = g (e^{iU} + g)/(e^{iU} − g), g_t(0) = 0, g_t'(0) = e^{t}

Radial steps are closed-form Koebe slit maps acting on 𝔻 directly. There is
no lift to the covering half-plane and no chart switch where |g| crosses
1/2; the antipodal branch in geometry._radial_unit covers the region where
the Koebe form degenerates.
"""

from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .config import ToleranceConfig
from .errors import ErrorCode, GeometryError, InputError, SwallowedError
from .geometry import (
    ConformalMap,
    MapChain,
    RadialSlit,
    TiltedSlit,
    VerticalSlit,
    polyline_self_intersects,
    radial_slit_capacity,
    radial_slit_radius,
)
from .models import INFINITY, Chart, CurvePath, DrivingFunction, DrivingKind

logger = logging.getLogger("loewnerlab.loewner")

_MIN_STEP = 1e-14


@dataclass(frozen=True)
class TraceResult:
    """A Loewner trace together with the slit maps that uniformize it."""

    curve: CurvePath
    steps: tuple[ConformalMap, ...]
    driving: DrivingFunction
    capacity: float
    truncated: bool = False
    meta: dict[str, float] = field(default_factory=dict)

    @property
    def chain(self) -> MapChain:
        """g_T: removes the whole trace (steps applied oldest first)."""
        return MapChain(self.steps)

    @property
    def kind(self) -> DrivingKind:
        return self.driving.kind


# ---------------------------------------------------------------------------
# Forward integration
# ---------------------------------------------------------------------------


def _rk4_interval(
    g: complex,
    d: complex,
    t0: float,
    t1: float,
    field_: Callable[[complex, complex, float], tuple[complex, complex]],
    distance: Callable[[complex, float], float],
    tol: ToleranceConfig,
    substeps: int,
) -> tuple[complex, complex]:
    """Integrate (g, g') over [t0, t1] with step halving near the singularity."""
    t = t0
    h = (t1 - t0) / substeps
    base_h = h
    while t < t1 - 1e-15 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        dist = distance(g, t)
        if dist < tol.swallow:
            raise SwallowedError(
                code=ErrorCode.SWALLOWED,
                message="point swallowed by the hull",
                details={"time": t, "distance": dist},
            )
        while dist < tol.refine_factor * math.sqrt(h) and h > _MIN_STEP:
            h /= 2
        k1g, k1d = field_(g, d, t)
        k2g, k2d = field_(g + 0.5 * h * k1g, d + 0.5 * h * k1d, t + 0.5 * h)
        k3g, k3d = field_(g + 0.5 * h * k2g, d + 0.5 * h * k2d, t + 0.5 * h)
        k4g, k4d = field_(g + h * k3g, d + h * k3d, t + h)
        g = g + h * (k1g + 2 * k2g + 2 * k3g + k4g) / 6
        d = d + h * (k1d + 2 * k2d + 2 * k3d + k4d) / 6
        t += h
        h = min(2 * h, base_h)
    return g, d


def _integrate(
    driving: DrivingFunction,
    z: complex,
    field_: Callable[[complex, complex, float], tuple[complex, complex]],
    distance: Callable[[complex, float], float],
    tolerances: ToleranceConfig | None,
    substeps: int,
) -> tuple[complex, complex]:
    tol = tolerances or ToleranceConfig()
    g, d = complex(z), 1.0 + 0j
    grid = driving.grid
    for k in range(driving.steps):
        g, d = _rk4_interval(g, d, float(grid[k]), float(grid[k + 1]), field_, distance, tol, substeps)
    end_dist = distance(g, driving.horizon)
    if end_dist < tol.swallow:
        raise SwallowedError(
            code=ErrorCode.SWALLOWED,
            message="point swallowed by the hull",
            details={"time": driving.horizon, "distance": end_dist},
        )
    return g, d


def chordal_forward(
    driving: DrivingFunction,
    z: complex,
    derivative: bool = False,
    tolerances: ToleranceConfig | None = None,
    substeps: int = 1,
) -> complex | tuple[complex, complex]:
    """
    g_T(z) for the chordal Loewner chain driven by `driving`.

    Args:
        driving: Chordal driving function on [0, T]
        z: Point of the closed upper half-plane outside the hull
        derivative: Also return g_T'(z)
        tolerances: Swallowing and refinement thresholds
        substeps: RK4 steps per grid interval before adaptive halving

    Raises:
        SwallowedError: if |g − W| drops below the swallowing threshold.
    """
    if driving.kind is not DrivingKind.CHORDAL:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message="chordal_forward needs a chordal driver")
    w = driving.value_at

    def field_(g: complex, d: complex, t: float) -> tuple[complex, complex]:
        q = g - float(w(t))
        return 2.0 / q, -2.0 * d / q**2

    def distance(g: complex, t: float) -> float:
        return abs(g - float(w(t)))

    g, d = _integrate(driving, z, field_, distance, tolerances, substeps)
    return (g, d) if derivative else g


def radial_forward(
    driving: DrivingFunction,
    z: complex,
    derivative: bool = False,
    tolerances: ToleranceConfig | None = None,
    substeps: int = 1,
) -> complex | tuple[complex, complex]:
    """g_T(z) for the radial Loewner chain in 𝔻 (and g_T'(z) on request)."""
    if driving.kind is not DrivingKind.RADIAL:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message="radial_forward needs a radial driver")
    u = driving.value_at

    def field_(g: complex, d: complex, t: float) -> tuple[complex, complex]:
        e = cmath.exp(1j * float(u(t)))
        q = e - g
        return g * (e + g) / q, d * (e * e + 2 * e * g - g * g) / q**2

    def distance(g: complex, t: float) -> float:
        return abs(g - cmath.exp(1j * float(u(t))))

    g, d = _integrate(driving, z, field_, distance, tolerances, substeps)
    return (g, d) if derivative else g


def conformal_radius(driving: DrivingFunction) -> float:
    """Conformal radius of 𝔻 minus the radial hull, seen from 0."""
    return math.exp(-driving.horizon)


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------


def _compose_tips(steps: list[ConformalMap], tips: np.ndarray) -> np.ndarray:
    """γ(t_k) = g_1^{-1} ∘ ... ∘ g_{k-1}^{-1}(tip_k), vectorized over k."""
    points = tips.astype(complex).copy()
    inverses = [s.inverse() for s in steps]
    for j in range(len(steps) - 2, -1, -1):
        points[j + 1 :] = inverses[j].evaluate(points[j + 1 :])
    return points


def chordal_trace(driving: DrivingFunction, vertical: bool = False) -> TraceResult:
    """
    Trace of the chordal Loewner chain by tilted-slit zipper composition.

    With `vertical=True` every step is a vertical slit at the step's end
    value (the lower-accuracy fallback).
    """
    if driving.kind is not DrivingKind.CHORDAL:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message="chordal_trace needs a chordal driver")
    values = driving.values
    taus = driving.dt
    steps: list[ConformalMap] = []
    tips = np.empty(driving.steps, dtype=complex)
    for k in range(driving.steps):
        if vertical:
            step: ConformalMap = VerticalSlit(float(values[k + 1]), float(taus[k]))
            tips[k] = step.tip  # type: ignore[attr-defined]
        else:
            step = TiltedSlit.from_step(float(values[k]), float(values[k + 1]), float(taus[k]))
            tips[k] = step.tip  # type: ignore[attr-defined]
        steps.append(step)
    points = np.concatenate([[complex(values[0])], _compose_tips(steps, tips)])
    curve = CurvePath(
        points,
        Chart.H,
        driving.grid,
        {"start": complex(values[0]), "end": INFINITY},
    )
    logger.debug(
        "Built chordal trace",
        extra={"steps": driving.steps, "capacity": driving.horizon, "vertical": vertical},
    )
    return TraceResult(curve, tuple(steps), driving, driving.horizon)


def radial_trace(driving: DrivingFunction, horizon: float | None = None) -> TraceResult:
    """
    Trace of the radial Loewner chain in 𝔻 targeting 0.

    Each step removes the radial slit of the step's capacity at the step's
    end angle. `horizon` truncates the chain (reported through `truncated`).
    """
    if driving.kind is not DrivingKind.RADIAL:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message="radial_trace needs a radial driver")
    truncated = horizon is not None and horizon < driving.horizon
    if truncated:
        driving = driving.truncate(float(horizon))  # type: ignore[arg-type]
    values = driving.values
    taus = driving.dt
    steps: list[ConformalMap] = []
    tips = np.empty(driving.steps, dtype=complex)
    for k in range(driving.steps):
        step = RadialSlit.removing(float(values[k + 1]), float(taus[k]))
        steps.append(step)
        tips[k] = radial_slit_radius(float(taus[k])) * np.exp(1j * values[k + 1])
    start = complex(np.exp(1j * values[0]))
    points = np.concatenate([[start], _compose_tips(steps, tips)])
    curve = CurvePath(points, Chart.D, driving.grid, {"start": start, "interior": 0j})
    return TraceResult(curve, tuple(steps), driving, driving.horizon, truncated=truncated)


# ---------------------------------------------------------------------------
# Inverse zipper
# ---------------------------------------------------------------------------


def _check_simple(curve: CurvePath) -> None:
    if polyline_self_intersects(curve.points):
        raise GeometryError(
            code=ErrorCode.SELF_INTERSECTION,
            message="curve polyline intersects itself",
            details={"points": int(curve.points.size)},
        )


def unzip_chordal(
    curve: CurvePath, vertical: bool = False
) -> tuple[DrivingFunction, tuple[ConformalMap, ...]]:
    """Peel a chordal curve one vertex per step; returns the driver and the slit maps."""
    if curve.chart is not Chart.H:
        raise GeometryError(
            code=ErrorCode.CHART_MISMATCH,
            message="chordal extraction needs a curve in the upper half-plane",
            details={"chart": curve.chart.value},
        )
    start = curve.start
    if abs(start.imag) > 1e-9:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="curve must start on the real line",
            details={"start": start},
        )
    _check_simple(curve)
    w = start.real
    t = 0.0
    grid = [0.0]
    values = [w]
    steps: list[ConformalMap] = []
    pending = np.array(curve.points[1:], dtype=complex)
    for k in range(pending.size):
        tip = complex(pending[k])
        rel = tip - w
        if not rel.imag > 0:
            raise GeometryError(
                code=ErrorCode.SELF_INTERSECTION,
                message="curve touches the boundary or itself during unzipping",
                details={"vertex": k + 1, "imag": rel.imag},
            )
        step: ConformalMap
        if vertical:
            step = VerticalSlit(tip.real, rel.imag**2 / 4)
            w = tip.real
            tau = rel.imag**2 / 4
        else:
            slit = TiltedSlit.from_tip(w, tip)
            w = w + slit.image_of_tip
            tau = slit.tau
            step = slit
        if k + 1 < pending.size:
            pending[k + 1 :] = step.evaluate(pending[k + 1 :])
        steps.append(step)
        t += tau
        grid.append(t)
        values.append(w)
    return DrivingFunction(np.array(grid), np.array(values), DrivingKind.CHORDAL), tuple(steps)


def extract_driving(curve: CurvePath, vertical: bool = False) -> DrivingFunction:
    """
    Driving function of a simple chordal curve in (ℍ; x, ∞).

    Raises:
        GeometryError: if the polyline is self-intersecting.
    """
    driving, _ = unzip_chordal(curve, vertical)
    return driving


def zipper_unwind(curve: CurvePath) -> MapChain:
    """The chain of slit maps removing a chordal curve."""
    _, steps = unzip_chordal(curve)
    return MapChain(steps)


def halfplane_capacity(curve: CurvePath) -> float:
    """Half-plane capacity of a curve attached to ℝ."""
    return extract_driving(curve).horizon


def unzip_radial(curve: CurvePath) -> tuple[DrivingFunction, tuple[ConformalMap, ...]]:
    """Radial inverse zipper for a curve from ∂𝔻 toward 0."""
    if curve.chart is not Chart.D:
        raise GeometryError(
            code=ErrorCode.CHART_MISMATCH,
            message="radial extraction needs a curve in the unit disk",
            details={"chart": curve.chart.value},
        )
    start = curve.start
    if abs(abs(start) - 1.0) > 1e-9:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="radial curve must start on the unit circle",
            details={"start": start},
        )
    _check_simple(curve)
    u = float(np.angle(start))
    t = 0.0
    grid = [0.0]
    values = [u]
    steps: list[ConformalMap] = []
    pending = np.array(curve.points[1:], dtype=complex)
    for k in range(pending.size):
        tip = complex(pending[k])
        x = abs(tip)
        if not 0 < x < 1:
            raise GeometryError(
                code=ErrorCode.SELF_INTERSECTION,
                message="curve reaches the boundary or the target during unzipping",
                details={"vertex": k + 1, "modulus": x},
            )
        angle = float(np.angle(tip))
        u = u + math.remainder(angle - u, 2 * math.pi)
        tau = radial_slit_capacity(x)
        step = RadialSlit.removing(u, tau)
        if k + 1 < pending.size:
            pending[k + 1 :] = step.evaluate(pending[k + 1 :])
        steps.append(step)
        t += tau
        grid.append(t)
        values.append(u)
    return DrivingFunction(np.array(grid), np.array(values), DrivingKind.RADIAL), tuple(steps)


def extract_radial_driving(curve: CurvePath) -> DrivingFunction:
    driving, _ = unzip_radial(curve)
    return driving


def radial_capacity(curve: CurvePath) -> float:
    """−log of the conformal radius of 𝔻 minus the curve, seen from 0."""
    return extract_radial_driving(curve).horizon


def normalization_residual(
    trace: TraceResult,
    radii: tuple[float, ...] = (1e2, 1e3, 1e4),
    angles: int = 8,
) -> dict[float, float]:
    """
    Fitted constant C in |g_T(z) − z − 2T/z| ≤ C/|z|² for each radius.

    Returns the maximum of |z|²·|g_T(z) − z − 2T/z| over `angles` points of
    the half circle at each radius.
    """
    chain = trace.chain
    theta = np.linspace(0.1, math.pi - 0.1, angles)
    out: dict[float, float] = {}
    for r in radii:
        z = r * np.exp(1j * theta)
        residual = np.abs(chain.evaluate(z) - z - 2 * trace.capacity / z) * r**2
        out[float(r)] = float(residual.max())
    return out
