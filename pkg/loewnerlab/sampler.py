"""SLE_κ and SLE_κ(ρ) driving functions, traces and neighborhood-stay probabilities.

Plain SLE_κ drivers are √κ·B on a uniform grid. With a force point the
step solves ΔW + (ρ/2)ΔV = √κ ΔB implicitly, where ΔV is the force-point
move under the same zipper step used to build the trace. The deterministic
κ = 0 path therefore has zero ρ-energy on its own grid.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy import optimize

from .config import SamplerDefaults, ToleranceConfig, worker_count
from .energies import force_point_step
from .errors import (
    ErrorCode,
    GeometryError,
    LabError,
    SamplingError,
    SwallowedError,
    validate_kappa,
    validate_rho,
)
from .geometry import CAYLEY_H_TO_D, ConformalMap, Region, map_curve, region_contains
from .loewner import TraceResult, chordal_trace, radial_trace
from .models import Chart, CurvePath, DrivingFunction, DrivingKind, Estimate
from .rng import stream

logger = logging.getLogger("loewnerlab.sampler")

_BRACKET_DOUBLINGS = 80


@dataclass(frozen=True)
class SamplerConfig:
    """One batch of SLE paths."""

    kappa: float
    rho: float | None = None
    kind: DrivingKind = DrivingKind.CHORDAL
    horizon: float = 1.0
    steps: int = 400
    seed: int = 20240601
    n_paths: int = 1
    start: float = 0.0  # W_0, or the starting angle U_0
    force_point: float | None = None  # defaults to the start (force point at the tip)
    swallow_policy: str = "reflect"
    reflect_epsilon: float = 1e-6
    subdivision: int = 16
    max_rejections: int = 100
    workers: int | None = None

    def __post_init__(self) -> None:
        validate_kappa(self.kappa, allow_zero=True)
        validate_rho(self.rho)
        if self.steps < 1 or not self.horizon > 0 or self.n_paths < 1:
            raise LabError(
                code=ErrorCode.INVALID_PARAMETER,
                message="sampler needs steps >= 1, horizon > 0 and n_paths >= 1",
                details={"steps": self.steps, "horizon": self.horizon, "n_paths": self.n_paths},
            )
        if self.swallow_policy not in ("reflect", "reject"):
            raise LabError(
                code=ErrorCode.INVALID_PARAMETER,
                message="swallow_policy must be 'reflect' or 'reject'",
                details={"swallow_policy": self.swallow_policy},
            )

    @classmethod
    def from_defaults(cls, defaults: SamplerDefaults, kappa: float, **overrides: Any) -> SamplerConfig:
        config = cls(
            kappa=kappa,
            horizon=defaults.horizon,
            steps=defaults.steps,
            swallow_policy=defaults.swallow_policy,
            reflect_epsilon=defaults.reflect_epsilon,
            subdivision=defaults.subdivision,
            max_rejections=defaults.max_rejections,
        )
        return replace(config, **overrides)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def forced(self) -> bool:
        return self.rho is not None and self.rho != 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "kappa": self.kappa,
            "rho": self.rho,
            "kind": self.kind.value,
            "horizon": self.horizon,
            "steps": self.steps,
            "dt": self.dt,
            "seed": self.seed,
            "n_paths": self.n_paths,
            "start": self.start,
            "force_point": self.start if self.force_point is None else self.force_point,
            "swallow_policy": self.swallow_policy,
        }


@dataclass(frozen=True)
class SampledPath:
    """A sampled driver with its force-point track and swallow bookkeeping."""

    index: int
    driving: DrivingFunction
    force_track: np.ndarray | None = None
    reflections: int = 0
    rejections: int = 0
    meta: dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


def _noise(config: SamplerConfig, index: int, attempt: int) -> np.random.Generator:
    if attempt == 0:
        return stream(config.seed, "paths", index)
    return stream(config.seed, "paths", index, "retry", attempt)


def _forced_move(
    kind: DrivingKind,
    w0: float,
    v0: float,
    tau: float,
    nu: float,
    rho: float,
    at_tip: bool,
    tol: ToleranceConfig,
    time: float,
) -> tuple[float, float]:
    """Solve ΔW + (ρ/2)ΔV = ν for the next driving value; returns (W₁, V₁)."""

    def residual(u: float) -> float:
        v1 = force_point_step(kind, w0, u, v0, tau, at_tip, tol, time)
        return (u - w0) + 0.5 * rho * (v1 - v0) - nu

    lo, hi = -math.inf, math.inf
    if not at_tip:
        margin = 1e-12 * (1 + abs(v0))
        hi = v0 - margin
        if kind is DrivingKind.RADIAL:
            lo = v0 - 2 * math.pi + margin
    center = min(max(w0 + nu, lo), hi)
    width = max(abs(nu), math.sqrt(tau), 1e-12)
    for _ in range(_BRACKET_DOUBLINGS):
        a = max(center - width, lo)
        b = min(center + width, hi)
        fa, fb = residual(a), residual(b)
        if fa * fb <= 0:
            w1 = a if fa == 0 else b if fb == 0 else optimize.brentq(residual, a, b, xtol=1e-14)
            return w1, force_point_step(kind, w0, w1, v0, tau, at_tip, tol, time)
        if a == lo and b == hi:
            break
        width *= 2
    raise SwallowedError(
        code=ErrorCode.FORCE_POINT_SWALLOWED,
        message="no driving step keeps the force point alive",
        details={"time": time, "gap": v0 - w0},
    )


def _forced_driver(
    config: SamplerConfig, normals: np.ndarray, rng: np.random.Generator, tol: ToleranceConfig
) -> tuple[list[float], list[float], list[float], int]:
    """Integrate the forced driver step by step; returns (grid, W, V, reflections)."""
    rho = float(config.rho or 0.0)
    kind = config.kind
    dt = config.dt
    scale = math.sqrt(config.kappa)
    w = config.start
    v = config.start if config.force_point is None else float(config.force_point)
    at_tip = v == w
    t = 0.0
    grid, ws, vs = [0.0], [w], [v]
    reflections = 0
    for z in normals:
        nu = scale * math.sqrt(dt) * float(z)
        moves: list[tuple[float, float, float]] = []
        # steps next to the force point are subdivided up front
        if at_tip or abs(v - w) >= tol.force_point:
            try:
                moves = [(dt, *_forced_move(kind, w, v, dt, nu, rho, at_tip, tol, t))]
            except SwallowedError:
                moves = []
        if not moves:
            moves, reflected = _subdivided(config, w, v, dt, nu, rho, at_tip, tol, t, rng)
            reflections += reflected
        for tau, w1, v1 in moves:
            t += tau
            grid.append(t)
            ws.append(w1)
            vs.append(v1)
        w, v = ws[-1], vs[-1]
        at_tip = False
    return grid, ws, vs, reflections


def _subdivided(
    config: SamplerConfig,
    w: float,
    v: float,
    dt: float,
    nu: float,
    rho: float,
    at_tip: bool,
    tol: ToleranceConfig,
    t: float,
    rng: np.random.Generator,
) -> tuple[list[tuple[float, float, float]], int]:
    """
    Split a step into `subdivision` substeps along a Brownian bridge of the step.

    A substep that still swallows the force point is reflected (V reset to
    W + reflect_epsilon) or, under the reject policy, re-raises.
    """
    count = config.subdivision
    tau = dt / count
    bridge = rng.standard_normal(count) * math.sqrt(config.kappa * tau)
    bridge = bridge - bridge.mean() + nu / count
    moves: list[tuple[float, float, float]] = []
    reflected = 0
    for j in range(count):
        try:
            w, v = _forced_move(config.kind, w, v, tau, float(bridge[j]), rho, at_tip, tol, t)
        except SwallowedError:
            if config.swallow_policy == "reject":
                raise
            w = w + float(bridge[j])
            v = w + config.reflect_epsilon
            reflected += 1
            logger.debug("Reflected force point", extra={"time": t, "epsilon": config.reflect_epsilon})
        at_tip = False
        t += tau
        moves.append((tau, w, v))
    return moves, reflected


def sample_path(config: SamplerConfig, index: int = 0, tol: ToleranceConfig | None = None) -> SampledPath:
    """
    Sample path `index` of the batch from the stream (seed, "paths", index).

    Raises:
        SamplingError: If the reject policy exhausts max_rejections.
    """
    tol = tol or ToleranceConfig()
    grid = np.linspace(0.0, config.horizon, config.steps + 1)
    rejections = 0
    for attempt in range(config.max_rejections + 1):
        rng = _noise(config, index, attempt)
        normals = rng.standard_normal(config.steps)
        if not config.forced:
            increments = math.sqrt(config.kappa * config.dt) * normals
            driving = DrivingFunction.from_increments(grid, increments, config.start, config.kind)
            return SampledPath(index, driving)
        try:
            times, ws, vs, reflections = _forced_driver(config, normals, rng, tol)
        except SwallowedError as e:
            rejections += 1
            logger.debug(
                "Rejected path with swallowed force point",
                extra={"index": index, "attempt": attempt, "time": e.details.get("time")},
            )
            continue
        driving = DrivingFunction(np.array(times), np.array(ws), config.kind)
        return SampledPath(
            index,
            driving,
            np.array(vs),
            reflections,
            rejections,
            {"grid_points": driving.steps + 1},
        )
    raise SamplingError(
        code=ErrorCode.FORCE_POINT_SWALLOWED,
        message="force point swallowed on every attempt",
        details={"index": index, "rejections": rejections},
    )


def sample_driving(config: SamplerConfig, index: int = 0) -> DrivingFunction:
    """√κ-Brownian driver (with the SLE_κ(ρ) drift when ρ is set)."""
    return sample_path(config, index).driving


def sample_trace(config: SamplerConfig, index: int = 0) -> TraceResult:
    """Driver plus its zipper trace."""
    driving = sample_driving(config, index)
    if config.kind is DrivingKind.RADIAL:
        return radial_trace(driving)
    return chordal_trace(driving)


def sample_batch(config: SamplerConfig) -> list[SampledPath]:
    """All `n_paths` paths, sampled on a thread pool; order follows the path index."""
    with ThreadPoolExecutor(max_workers=worker_count(config.workers)) as pool:
        paths = list(pool.map(lambda i: sample_path(config, i), range(config.n_paths)))
    logger.info(
        "Sampled path batch",
        extra={
            "n_paths": config.n_paths,
            "kappa": config.kappa,
            "rho": config.rho,
            "reflections": sum(p.reflections for p in paths),
            "rejections": sum(p.rejections for p in paths),
        },
    )
    return paths


def quadratic_variation(driving: DrivingFunction) -> float:
    """Σ (ΔW)² over the grid."""
    return float(np.sum(driving.increments**2))


# ---------------------------------------------------------------------------
# Neighborhood events
# ---------------------------------------------------------------------------


def _in_chart(curve: CurvePath, chart: Chart) -> CurvePath:
    if curve.chart is chart:
        return curve
    if curve.chart is Chart.H and chart is Chart.D:
        return map_curve(CAYLEY_H_TO_D, curve, Chart.D)
    raise GeometryError(
        code=ErrorCode.CHART_MISMATCH,
        message="radial traces live in the disk",
        details={"trace": curve.chart.value, "region": chart.value},
    )


def _placed(curve: CurvePath, chart: Chart, transform: ConformalMap | None) -> CurvePath:
    if transform is None:
        return _in_chart(curve, chart)
    return map_curve(transform, curve, chart)


def stay_indicators(
    config: SamplerConfig,
    region: Region,
    clearance: float = 0.0,
    transform: ConformalMap | None = None,
) -> np.ndarray:
    """
    Per-path 0/1 indicators of the trace staying in `region`.

    `transform` carries traces from their sampling chart into the region's
    chart (for example (ℍ; 0, ∞) onto a chord of 𝔻 with other endpoints).
    Without it, chordal traces in ℍ are moved to 𝔻 by the Cayley map when
    the region lives there.

    Raises:
        GeometryError: If the trace's start point is neither inside the region
            nor in one of its exempt disks.
    """
    radial = config.kind is DrivingKind.RADIAL
    start = complex(np.exp(1j * config.start)) if radial else complex(config.start)
    origin = CurvePath(np.array([start, start]), Chart.D if radial else Chart.H)
    origin = _placed(origin, region.chart, transform)
    if not bool(region.contains_points(origin.points[:1])[0]):
        raise GeometryError(
            code=ErrorCode.HYPOTHESIS_VIOLATION,
            message="region does not contain the trace's starting point",
            details={"start": start},
        )

    def stays(index: int) -> float:
        trace = sample_trace(config, index)
        return float(region_contains(region, _placed(trace.curve, region.chart, transform), clearance))

    with ThreadPoolExecutor(max_workers=worker_count(config.workers)) as pool:
        return np.array(list(pool.map(stays, range(config.n_paths))))


def estimate_stay_probability(
    config: SamplerConfig,
    region: Region,
    clearance: float = 0.0,
    transform: ConformalMap | None = None,
) -> Estimate:
    """Fraction of sampled traces staying in `region`, with binomial standard error."""
    values = stay_indicators(config, region, clearance, transform)
    estimate = Estimate.from_values(
        values,
        {"seed": config.seed, "kappa": config.kappa, "steps": config.steps, "horizon": config.horizon},
    )
    logger.debug(
        "Estimated stay probability",
        extra={"mean": estimate.mean, "n_paths": config.n_paths, "kappa": config.kappa},
    )
    return estimate
