"""Loewner energies, potentials, partition-function kernels and exponent tables.

Energies are Dirichlet energies of driving functions, computed on the
piecewise-linear interpolant: ½ Σ (ΔW)²/Δt. Potentials add the log
corrections and Brownian loop terms that make them conformally covariant.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .config import ToleranceConfig
from .errors import (
    ErrorCode,
    GeometryError,
    InputError,
    SwallowedError,
    finite_or_inf,
    validate_kappa,
    validate_rho,
)
from .geometry import (
    CAYLEY_D_TO_H,
    CAYLEY_H_TO_D,
    ComplementRegion,
    ConformalMap,
    DiskRegion,
    MapChain,
    Region,
    TiltedSlit,
    chord_chart,
    covering_map,
    polylines_intersect,
)
from .loewner import (
    chordal_trace,
    extract_driving,
    extract_radial_driving,
    radial_trace,
    unzip_chordal,
    unzip_radial,
)
from .loopsoup import LoopMassParams, loop_mass_two_sets, multi_cross_mass
from .models import (
    INFINITY,
    Chart,
    CurvePath,
    DrivingFunction,
    DrivingKind,
    Estimate,
    MarkedConfiguration,
    is_infinite,
)

logger = logging.getLogger("loewnerlab.energies")

# κ·c(κ) at κ = 0
_SCALED_CHARGE_AT_ZERO = -24.0


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------


class Case(Enum):
    """Deformation cases and their marked points."""

    CHORDAL = "chordal"
    FORCED_CHORDAL = "forced-chordal"
    MULTI_CHORDAL = "multi-chordal"
    RADIAL = "radial"
    FORCED_RADIAL = "forced-radial"
    MULTI_RADIAL = "multi-radial"

    @property
    def is_radial(self) -> bool:
        return self in (Case.RADIAL, Case.FORCED_RADIAL, Case.MULTI_RADIAL)


@dataclass(frozen=True)
class ExponentTable:
    """Conformal weights, central charge and their κ → 0 limits for one parameter set."""

    kappa: float
    rho: float = 0.0
    n: int = 1
    mu: float = 0.0

    @property
    def b(self) -> float:
        k = self.kappa
        return (6 - k) / (2 * k)

    @property
    def c(self) -> float:
        k = self.kappa
        return -(6 - k) * (8 - 3 * k) / (2 * k)

    @property
    def b_tilde(self) -> float:
        k = self.kappa
        return (6 - k) * (k - 2) / (8 * k)

    @property
    def b1(self) -> float:
        return self.b

    @property
    def b2(self) -> float:
        return self.rho * (self.rho + 4 - self.kappa) / (4 * self.kappa)

    @property
    def b3(self) -> float:
        return self.rho / self.kappa

    @property
    def alpha(self) -> float:
        return (self.rho + 2) * (self.rho + 6 - self.kappa) / (4 * self.kappa)

    @property
    def beta(self) -> float:
        return (self.rho + self.kappa - 2) * (self.rho + 6 - self.kappa) / (8 * self.kappa)

    @property
    def b_tilde_n(self) -> float:
        return (self.n**2 - 1 - self.mu**2) / (2 * self.kappa)

    def labels(self, case: Case) -> tuple[str, ...]:
        """Marked-point labels of a case; "0" is the interior target."""
        if case is Case.MULTI_CHORDAL:
            return tuple(f"x{j + 1}" for j in range(2 * self.n))
        if case is Case.MULTI_RADIAL:
            return (*(f"x{j + 1}" for j in range(self.n)), "0")
        if case.is_radial:
            return ("x", "0")
        return ("x", "y")

    def weights(self, case: Case) -> dict[str, float]:
        """Weight b_κ(j) carried by each marked point."""
        return {label: self._weight(case, label, self.kappa)[0] for label in self.labels(case)}

    def scaled_weights_at_zero(self, case: Case) -> dict[str, float]:
        """κ·b_κ(j) at κ = 0 (each weight is a polynomial in κ over κ)."""
        return {label: self._weight(case, label, 0.0)[1] for label in self.labels(case)}

    def _weight(self, case: Case, label: str, k: float) -> tuple[float, float]:
        """(b_κ(j), κ·b_κ(j)) evaluated at κ = k; the first entry is nan at k = 0."""
        rho, n, mu = self.rho, self.n, self.mu
        if case is Case.FORCED_CHORDAL or (case is Case.FORCED_RADIAL and label == "x"):
            scaled = (rho + 2) * (rho + 6 - k) / 4
        elif case is Case.FORCED_RADIAL:
            scaled = (rho + k - 2) * (rho + 6 - k) / 8
        elif case is Case.MULTI_RADIAL and label == "0":
            scaled = (6 - k) * (k - 2) / 8 + (n**2 - 1 - mu**2) / 2
        elif label == "0":
            scaled = (6 - k) * (k - 2) / 8
        else:
            scaled = (6 - k) / 2
        return (scaled / k if k else math.nan), scaled

    def limits(self, case: Case) -> dict[str, float]:
        """e(j) = lim_{κ→0} −2 b_κ(j)/c(κ), from the scaled weights at κ = 0."""
        return {
            label: -2 * scaled / _SCALED_CHARGE_AT_ZERO
            for label, scaled in self.scaled_weights_at_zero(case).items()
        }

    def corrected_weights(self, case: Case) -> dict[str, float]:
        """e_κ(j) = b_κ(j) + c(κ)·e(j)/2, the weight left after the loop and energy terms."""
        weights = self.weights(case)
        limits = self.limits(case)
        return {label: weights[label] + self.c * limits[label] / 2 for label in weights}

    def to_dict(self) -> dict[str, Any]:
        return {
            "kappa": self.kappa,
            "rho": self.rho,
            "n": self.n,
            "mu": self.mu,
            "b": self.b,
            "c": self.c,
            "b_tilde": self.b_tilde,
            "b1": self.b1,
            "b2": self.b2,
            "b3": self.b3,
            "alpha": self.alpha,
            "beta": self.beta,
            "b_tilde_n": self.b_tilde_n,
        }


def exponents(
    kappa: float, rho: float | None = None, n: int | None = None, mu: float | None = None
) -> ExponentTable:
    """
    Build the exponent table for the given parameters.

    Raises:
        LabError: If kappa is outside (0, 4], rho <= -2 or n < 1.
    """
    kappa = validate_kappa(kappa)
    rho_value = validate_rho(rho)
    count = 1 if n is None else int(n)
    if count < 1:
        raise InputError(
            code=ErrorCode.INVALID_PARAMETER,
            message="n must be >= 1",
            details={"n": n},
        )
    return ExponentTable(kappa, rho_value, count, 0.0 if mu is None else float(mu))


def deformation_coefficients(case: Case, table: ExponentTable) -> dict[str, float]:
    """Coefficients of log|f'| at each marked point in the κ → 0 deformation of the potential."""
    return table.limits(case)


def F_functional(case: Case, table: ExponentTable, log_derivatives: Mapping[str, float]) -> float:
    """
    −Σ_j e_κ(j) log|f'(z_j)| over the marked points of the case.

    Raises:
        InputError: If a marked point has no log-derivative.
    """
    weights = table.corrected_weights(case)
    missing = [label for label in weights if label not in log_derivatives]
    if missing:
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message="missing log-derivatives for marked points",
            details={"missing": missing},
        )
    return -sum(weights[label] * float(log_derivatives[label]) for label in weights)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def _halfplane_poisson(x: complex, y: complex) -> float:
    if is_infinite(y) or is_infinite(x):
        return 1.0
    return abs(complex(x) - complex(y)) ** -2


def poisson_kernel(config: MarkedConfiguration) -> float:
    """
    Boundary Poisson excursion kernel P of (D; x, y) (the κ = 2 partition function).

    P_ℍ(x, y) = |x − y|^{-2}, P_ℍ(x, ∞) = 1, and in 𝔻 through the Cayley map
    P_𝔻(x, y) = |ψ'(x)||ψ'(y)| P_ℍ(ψ(x), ψ(y)).
    """
    if len(config.boundary) < 2:
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message="the Poisson kernel needs two boundary points",
        )
    x, y = config.boundary[0], config.boundary[1]
    if config.chart is Chart.H:
        return _halfplane_poisson(x, y)
    psi = CAYLEY_D_TO_H
    return (
        psi.abs_derivative(x) * psi.abs_derivative(y) * _halfplane_poisson(psi.image(x), psi.image(y))
    )


def kernel(config: MarkedConfiguration) -> float:
    """
    SLE partition function H of a canonical configuration.

    Chordal: P^{b(κ)}, or P^{α} with a force point weight ρ. Radial and
    multi-radial with target 0: Π_{j<l} |sin((θ_j − θ_l)/2)|^{2/κ} exp((μ/κ) Σ θ_j).

    Raises:
        InputError: Without κ, or for multichordal configurations.
    """
    if config.kappa is None:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message="kernel needs kappa")
    table = exponents(config.kappa, config.rho)
    if config.interior is not None:
        theta = np.angle(np.asarray(config.boundary, dtype=complex))
        value = 1.0
        for j in range(theta.size):
            for m in range(j + 1, theta.size):
                value *= abs(math.sin((theta[j] - theta[m]) / 2)) ** (2 / table.kappa)
        return value * math.exp(config.mu / table.kappa * float(theta.sum()))
    if len(config.boundary) != 2:
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message="no closed-form kernel for multichordal configurations",
            details={"points": len(config.boundary)},
        )
    exponent = table.alpha if config.rho is not None else table.b
    return poisson_kernel(config) ** exponent


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


def _require_kind(driving: DrivingFunction, kind: DrivingKind) -> None:
    if driving.kind is not kind:
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message=f"expected a {kind.value} driving function",
            details={"kind": driving.kind.value},
        )


def dirichlet_energy(driving: DrivingFunction) -> float:
    """½ ∫ W'(t)² dt on the piecewise-linear interpolant."""
    return finite_or_inf(0.5 * float(np.sum(driving.increments**2 / driving.dt)), "energy")


def chordal_energy(driving: DrivingFunction) -> float:
    _require_kind(driving, DrivingKind.CHORDAL)
    return dirichlet_energy(driving)


def radial_energy(driving: DrivingFunction) -> float:
    _require_kind(driving, DrivingKind.RADIAL)
    return dirichlet_energy(driving)


def force_point_step(
    kind: DrivingKind,
    w0: float,
    w1: float,
    v0: float,
    tau: float,
    at_tip: bool = False,
    tol: ToleranceConfig | None = None,
    time: float = 0.0,
) -> float:
    """
    Image of the force point under one zipper step from w0 to w1.

    Chordal steps are the tilted slits of the trace; a force point at the tip
    goes to the right base image of the slit. Radial steps are the radial
    slits at w1, where cos((V − w1)/2) shrinks by e^{−τ/2}.

    Raises:
        SwallowedError: If the force point is swallowed (FORCE_POINT_SWALLOWED).
    """
    tol = tol or ToleranceConfig()
    if kind is DrivingKind.CHORDAL:
        step = TiltedSlit.from_step(w0, w1, tau)
        if at_tip:
            v1 = w0 + step.b
        else:
            v1 = float(np.real(step.evaluate(np.asarray(complex(v0)))))
        if not v1 - w1 > tol.swallow:
            raise _force_point_swallowed(time, v1 - w1)
        return v1
    theta = 0.0 if at_tip else v0 - w1
    if not at_tip and not 0.0 < theta < 2 * math.pi:
        raise _force_point_swallowed(time, theta)
    v1 = w1 + 2 * math.acos(math.cos(theta / 2) * math.exp(-tau / 2))
    if not 0.0 < v1 - w1 < 2 * math.pi:
        raise _force_point_swallowed(time, v1 - w1)
    return v1


def _force_point_swallowed(time: float, gap: float) -> SwallowedError:
    return SwallowedError(
        code=ErrorCode.FORCE_POINT_SWALLOWED,
        message="force point swallowed",
        details={"time": time, "gap": gap},
    )


def force_point_track(
    driving: DrivingFunction,
    start: float | None = None,
    tol: ToleranceConfig | None = None,
) -> np.ndarray:
    """
    Force point V on the driving grid: V_t = g_t(v) (chordal) or e^{iV_t} = g_t(e^{iv}) (radial).

    `start` defaults to the driving start (force point at the tip). Chordal
    force points must lie right of the start; radial ones are angles in
    (U_0, U_0 + 2π).
    """
    values = driving.values
    v = float(values[0]) if start is None else float(start)
    if v < values[0]:
        raise InputError(
            code=ErrorCode.INVALID_PARAMETER,
            message="force point must lie right of the driving start",
            details={"force_point": v, "start": float(values[0])},
        )
    track = np.empty_like(values)
    track[0] = v
    at_tip = v == values[0]
    taus = driving.dt
    for k in range(driving.steps):
        v = force_point_step(
            driving.kind,
            float(values[k]),
            float(values[k + 1]),
            v,
            float(taus[k]),
            at_tip,
            tol,
            float(driving.grid[k]),
        )
        at_tip = False
        track[k + 1] = v
    return track


def forced_energy(
    driving: DrivingFunction,
    rho: float,
    force_point: float | None = None,
    track: np.ndarray | None = None,
) -> float:
    """
    ½ ∫ (W' + (ρ/2) V')² dt for either kind.

    Chordal V' = 2/(V − W) and radial V' = cot((V − W)/2), so this is the
    energy of the driving function relative to the SLE₀(ρ) drift.
    """
    rho = validate_rho(rho)
    if rho == 0.0:
        return dirichlet_energy(driving)
    if track is None:
        track = force_point_track(driving, force_point)
    drift = driving.increments + 0.5 * rho * np.diff(track)
    return finite_or_inf(0.5 * float(np.sum(drift**2 / driving.dt)), "forced energy")


def rho_energy(
    driving: DrivingFunction, rho: float, force_point: float | None = None, track: np.ndarray | None = None
) -> float:
    """Chordal ρ-Loewner energy."""
    _require_kind(driving, DrivingKind.CHORDAL)
    return forced_energy(driving, rho, force_point, track)


def forced_radial_energy(
    driving: DrivingFunction, rho: float, force_point: float | None = None, track: np.ndarray | None = None
) -> float:
    """Radial ρ-Loewner energy with force point e^{iv} on the circle."""
    _require_kind(driving, DrivingKind.RADIAL)
    return forced_energy(driving, rho, force_point, track)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialReport:
    """Named potential terms; `loop` is the Monte Carlo (or quadrature) loop term."""

    kind: str
    energy: float
    terms: dict[str, float]
    loop: Estimate | None = None
    horizon: float = 0.0
    truncated: bool = False
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def total(self) -> float:
        value = sum(self.terms.values())
        if self.loop is not None:
            value += self.loop.mean
        return finite_or_inf(value, self.kind)

    @property
    def stderr(self) -> float:
        return self.loop.stderr if self.loop is not None else 0.0

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "kind": self.kind,
            "total": self.total,
            "stderr": self.stderr,
            "energy": self.energy,
            "terms": dict(self.terms),
            "horizon": self.horizon,
            "truncated": self.truncated,
        }
        if self.loop is not None:
            data["loop"] = self.loop.to_dict()
        if self.diagnostics:
            data["diagnostics"] = {k: _plain(v) for k, v in self.diagnostics.items()}
        return data


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


# ---------------------------------------------------------------------------
# Chordal potentials
# ---------------------------------------------------------------------------


def _default_chordal_config(curve: CurvePath) -> MarkedConfiguration:
    end = curve.marked.get("end", INFINITY if curve.chart is Chart.H else curve.tip)
    return MarkedConfiguration.chordal(curve.marked.get("start", curve.start), end, chart=curve.chart)


def chord_normalizer(config: MarkedConfiguration) -> MapChain:
    """Map from the configuration's chart to (ℍ; 0, ∞)."""
    x, y = config.boundary[0], config.boundary[1]
    if config.chart is Chart.H:
        return MapChain.of(chord_chart(x, y))
    psi = CAYLEY_D_TO_H
    return MapChain.of(psi, chord_chart(psi.image(x), psi.image(y)))


def _normalized_curve(curve: CurvePath, config: MarkedConfiguration) -> tuple[CurvePath, MapChain]:
    """The curve in (ℍ; 0, ∞), starting exactly at 0; vertices sent to ∞ are dropped."""
    if curve.chart is not config.chart:
        raise GeometryError(
            code=ErrorCode.CHART_MISMATCH,
            message="curve and configuration are in different charts",
            details={"curve": curve.chart.value, "config": config.chart.value},
        )
    chain = chord_normalizer(config)
    with np.errstate(divide="ignore", invalid="ignore"):
        points = chain.evaluate(np.asarray(curve.points, dtype=complex))
    points = points[np.isfinite(points)]
    points[0] = 0j
    return CurvePath(points, Chart.H, None, {"start": 0j, "end": INFINITY}), chain


def _reaches_end(curve: CurvePath, config: MarkedConfiguration, tol: float) -> bool:
    y = config.boundary[1]
    if is_infinite(y):
        return not np.isfinite(curve.tip)
    return abs(curve.tip - y) <= tol


def chordal_potential(
    curve: CurvePath,
    config: MarkedConfiguration | None = None,
    vertical: bool = False,
    tol: ToleranceConfig | None = None,
) -> PotentialReport:
    """
    𝓗 = I/12 − ¼ log P for a chord of (D; x, y).

    Raises:
        GeometryError: If the curve is not simple or not in the config's chart.
    """
    tol = tol or ToleranceConfig()
    config = config or _default_chordal_config(curve)
    normalized, _ = _normalized_curve(curve, config)
    driving = extract_driving(normalized, vertical)
    energy = chordal_energy(driving)
    terms = {
        "energy": energy / 12,
        "kernel": -0.25 * math.log(poisson_kernel(config)),
    }
    truncated = not _reaches_end(curve, config, tol.geometric)
    logger.debug(
        "Computed chordal potential",
        extra={"energy": energy, "steps": driving.steps, "truncated": truncated},
    )
    return PotentialReport("chordal", energy, terms, None, driving.horizon, truncated)


def rho_potential(
    curve: CurvePath,
    config: MarkedConfiguration,
    vertical: bool = False,
    tol: ToleranceConfig | None = None,
) -> PotentialReport:
    """
    𝓗^ρ = I^ρ/12 − ((ρ+2)(ρ+6)/48) log P.

    The force point defaults to the chord's start x.

    Raises:
        SwallowedError: If the force point is swallowed.
    """
    tol = tol or ToleranceConfig()
    rho = validate_rho(config.rho)
    normalized, chain = _normalized_curve(curve, config)
    driving = extract_driving(normalized, vertical)
    start = None
    if config.force_point is not None and config.force_point != config.boundary[0]:
        start = float(chain.image(config.force_point).real)
    track = force_point_track(driving, start, tol)
    energy = rho_energy(driving, rho, track=track)
    coefficient = (rho + 2) * (rho + 6) / 48
    terms = {
        "energy": energy / 12,
        "kernel": -coefficient * math.log(poisson_kernel(config)),
    }
    return PotentialReport(
        "rho-chordal",
        energy,
        terms,
        None,
        driving.horizon,
        not _reaches_end(curve, config, tol.geometric),
        {"rho": rho, "force_point_end": float(track[-1])},
    )


def _to_disk(curve: CurvePath) -> CurvePath:
    if curve.chart is Chart.D:
        return curve
    points = np.array([CAYLEY_H_TO_D.image(complex(z)) for z in curve.points], dtype=complex)
    return CurvePath(points, Chart.D)


def multichordal_potential(
    curves: Sequence[CurvePath],
    config: MarkedConfiguration | None = None,
    params: LoopMassParams | None = None,
    vertical: bool = False,
) -> PotentialReport:
    """
    Σ_j 𝓗(γ_j) + 𝔅(γ̄) for disjoint chords; the loop term is estimated in 𝔻.

    `config.links` pairs boundary indices; without a config every chord uses
    its own start and end marks.

    Raises:
        GeometryError: If two chords intersect.
    """
    for i, first in enumerate(curves):
        for second in curves[i + 1 :]:
            a = first.points[np.isfinite(first.points)]
            b = second.points[np.isfinite(second.points)]
            if polylines_intersect(a, b):
                raise GeometryError(
                    code=ErrorCode.INTERSECTING_CURVES,
                    message="multichordal curves must be disjoint",
                )
    reports = []
    for index, curve in enumerate(curves):
        if config is not None and config.links:
            a, b = config.links[index]
            single = MarkedConfiguration.chordal(
                config.boundary[a], config.boundary[b], chart=config.chart
            )
        else:
            single = _default_chordal_config(curve)
        reports.append(chordal_potential(curve, single, vertical))
    if len(curves) < 2:
        loop = Estimate.exact(0.0, {"reason": "single curve"})
    else:
        loop = multi_cross_mass([_to_disk(c) for c in curves], DiskRegion(), params)
    energy = sum(r.energy for r in reports)
    terms = {
        "energy": sum(r.terms["energy"] for r in reports),
        "kernel": sum(r.terms["kernel"] for r in reports),
    }
    logger.info(
        "Computed multichordal potential",
        extra={"n": len(curves), "loop_mean": loop.mean, "loop_stderr": loop.stderr},
    )
    return PotentialReport(
        "multi-chordal",
        energy,
        terms,
        loop,
        max(r.horizon for r in reports),
        any(r.truncated for r in reports),
        {"per_curve": [r.total for r in reports]},
    )


# ---------------------------------------------------------------------------
# Radial potentials
# ---------------------------------------------------------------------------


def _radial_driving(source: CurvePath | DrivingFunction, horizon: float | None) -> tuple[DrivingFunction, bool]:
    driving = source if isinstance(source, DrivingFunction) else extract_radial_driving(source)
    _require_kind(driving, DrivingKind.RADIAL)
    truncated = horizon is not None and horizon < driving.horizon
    if truncated:
        driving = driving.truncate(float(horizon))  # type: ignore[arg-type]
    return driving, truncated


def radial_potential(
    source: CurvePath | DrivingFunction, horizon: float | None = None
) -> PotentialReport:
    """𝓗^R = I^R/12 for an arc toward 0 (optionally cut at `horizon`)."""
    driving, truncated = _radial_driving(source, horizon)
    energy = radial_energy(driving)
    return PotentialReport(
        "radial", energy, {"energy": energy / 12}, None, driving.horizon, truncated
    )


def forced_radial_potential(
    source: CurvePath | DrivingFunction,
    rho: float,
    force_point: float | None = None,
    horizon: float | None = None,
) -> PotentialReport:
    """𝓗^{R,ρ} = I^{R,ρ}/12; `force_point` is the angle of the force point."""
    driving, truncated = _radial_driving(source, horizon)
    energy = forced_radial_energy(driving, rho, force_point)
    return PotentialReport(
        "forced-radial",
        energy,
        {"energy": energy / 12},
        None,
        driving.horizon,
        truncated,
        {"rho": rho},
    )


def _on_circle(points: np.ndarray) -> np.ndarray:
    out = np.array(points, dtype=complex)
    out[0] = out[0] / abs(out[0])
    return out


def _unzip_arcs(arcs: Sequence[np.ndarray]) -> tuple[MapChain, float]:
    """Chain removing the arcs one after another, and log of its derivative at 0."""
    steps: list[ConformalMap] = []
    cap = 0.0
    for points in arcs:
        if points.size < 2:
            continue
        mapped = MapChain(tuple(steps)).evaluate(points) if steps else points
        driving, arc_steps = unzip_radial(CurvePath(_on_circle(mapped), Chart.D))
        steps.extend(arc_steps)
        cap += driving.horizon
    return MapChain(tuple(steps)), cap


def _covering_values(chain: MapChain, u: float) -> tuple[float, float, float]:
    """(φ(u), φ'(u), Re Sφ(u)) of the covering lift of `chain` on the branch u."""
    phi = covering_map(chain, branch=u)
    point = np.asarray([complex(u)])
    value, d1, _, _ = phi.derivatives(point)
    schwarzian = phi.schwarzian(point)
    slope = float(np.real(d1[0]))
    if not slope > 0:
        raise GeometryError(
            code=ErrorCode.SINGULAR_POINT,
            message="covering map derivative is not positive",
            details={"u": u, "derivative": slope},
        )
    return float(np.real(value[0])), slope, float(np.real(schwarzian[0]))


def _staircase_density(schwarzian: float, slope: float) -> float:
    """Rate of the Brownian loop term along one coordinate of the multi-time path."""
    return -schwarzian / 3 + (1 - slope) / 6


@dataclass(frozen=True)
class _Arc:
    driving: DrivingFunction
    points: np.ndarray
    steps: tuple[ConformalMap, ...]


def _grown_arcs(
    drivings: Sequence[DrivingFunction], horizons: Sequence[float] | None
) -> list[_Arc]:
    arcs = []
    for index, driving in enumerate(drivings):
        _require_kind(driving, DrivingKind.RADIAL)
        horizon = None if horizons is None else horizons[index]
        trace = radial_trace(driving, horizon)
        arcs.append(_Arc(trace.driving, np.asarray(trace.curve.points), trace.steps))
    for i, first in enumerate(arcs):
        for second in arcs[i + 1 :]:
            if polylines_intersect(first.points, second.points):
                raise GeometryError(
                    code=ErrorCode.INTERSECTING_CURVES,
                    message="multi-radial arcs must be disjoint",
                )
    return arcs


def _loop_rate_along(arc: _Arc, others: Sequence[np.ndarray]) -> tuple[float, float]:
    """∫ of the loop-term density while `arc` grows; also log G'(0) at the end."""
    pending = [np.array(points, dtype=complex) for points in others]
    values = arc.driving.values
    density = np.empty(values.size)
    cap = 0.0
    for k in range(values.size):
        if k > 0:
            step = arc.steps[k - 1]
            pending = [step.evaluate(points) for points in pending]
        chain, cap = _unzip_arcs(pending)
        _, slope, schwarzian = _covering_values(chain, float(values[k]))
        density[k] = _staircase_density(schwarzian, slope)
    return float(np.trapezoid(density, arc.driving.grid)), cap


def _final_view(arc: _Arc, others: Sequence[np.ndarray]) -> tuple[float, float, float]:
    """(θ, φ', cap) for an arc at full length with the others removed after it."""
    chain = MapChain(arc.steps)
    mapped = [chain.evaluate(np.asarray(points, dtype=complex)) for points in others]
    rest, cap = _unzip_arcs(mapped)
    theta, slope, _ = _covering_values(rest, float(arc.driving.values[-1]))
    return theta, slope, cap


def multiradial_potential(
    drivings: Sequence[DrivingFunction],
    config: MarkedConfiguration | None = None,
    mu: float | None = None,
    horizons: Sequence[float] | None = None,
    order: Sequence[int] | None = None,
) -> PotentialReport:
    """
    Multi-radial potential at the multi-time T̄ = (T_1, ..., T_n).

    The Brownian loop term m is integrated along a staircase path in
    multi-time: arcs grow one at a time in `order` (index order by default)
    while earlier arcs stay at full length.

    Raises:
        GeometryError: For colliding arcs or a degenerate covering map.
    """
    n = len(drivings)
    if n < 1:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message="at least one arc is required")
    if mu is None:
        mu = config.mu if config is not None else 0.0
    order = list(range(n)) if order is None else [int(j) for j in order]
    if sorted(order) != list(range(n)):
        raise InputError(
            code=ErrorCode.INVALID_PARAMETER,
            message="order must be a permutation of the arc indices",
            details={"order": order},
        )
    arcs = _grown_arcs(drivings, horizons)

    loop_term = 0.0
    for position, j in enumerate(order):
        earlier = [arcs[i].points for i in order[:position]]
        rate, _ = _loop_rate_along(arcs[j], earlier)
        loop_term += rate

    thetas = np.empty(n)
    slopes = np.empty(n)
    caps = np.empty(n)
    log_derivative = np.empty(n)
    for j, arc in enumerate(arcs):
        others = [arcs[i].points for i in range(n) if i != j]
        thetas[j], slopes[j], caps[j] = _final_view(arc, others)
        log_derivative[j] = arc.driving.horizon + caps[j]
    total_capacity = float(log_derivative.mean())

    energies = [radial_energy(arc.driving) for arc in arcs]
    angles = 0.0
    for j in range(n):
        for m in range(j + 1, n):
            angles += math.log(abs(math.sin((thetas[j] - thetas[m]) / 2)))
    terms = {
        "energy": sum(energies) / 12,
        "interior": -((n**2 + 3 * n - 4 - mu**2) / 24) * total_capacity,
        "boundary": -0.25 * float(np.sum(np.log(slopes) - 0.5 * caps)),
        "angles": -angles / 6,
        "spiral": -(mu / 12) * float(thetas.sum()),
    }
    loop = Estimate.exact(loop_term, {"method": "staircase", "order": order})
    logger.debug(
        "Computed multi-radial potential",
        extra={"n": n, "loop_term": loop_term, "capacity": total_capacity},
    )
    return PotentialReport(
        "multi-radial",
        sum(energies),
        terms,
        loop,
        max(arc.driving.horizon for arc in arcs),
        horizons is not None,
        {
            "thetas": thetas,
            "capacity_spread": float(np.ptp(log_derivative)),
            "mu": mu,
        },
    )


# ---------------------------------------------------------------------------
# Deformation bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HullIdentity:
    """Radial energy change when a hull is removed, against its Schwarzian quadrature."""

    lhs: float
    quadrature: float
    loop_quadrature: float
    closed_form: float
    loop_estimate: Estimate | None = None

    @property
    def discrepancy(self) -> float:
        return abs(self.lhs - self.quadrature)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "lhs": self.lhs,
            "quadrature": self.quadrature,
            "loop_quadrature": self.loop_quadrature,
            "closed_form": self.closed_form,
            "discrepancy": self.discrepancy,
        }
        if self.loop_estimate is not None:
            data["loop_estimate"] = self.loop_estimate.to_dict()
        return data


def radial_hull_identity(
    curve: CurvePath, hull: CurvePath, loop_params: LoopMassParams | None = None
) -> HullIdentity:
    """
    Compare I^R(ψ(γ)) − I^R(γ) with −3 Δ log φ'(U) − 4 ∫ Sφ(U) dt.

    ψ removes the hull; φ_t is the covering lift of the map removing the
    image of the hull after γ[0, t]. The loop term −(1/3)∫S − (1/8)Δ log φ_t'(0)
    is returned as `loop_quadrature`; `loop_params` adds its Monte Carlo estimate.
    """
    if polylines_intersect(curve.points, hull.points):
        raise GeometryError(code=ErrorCode.INTERSECTING_CURVES, message="curve meets the hull")
    driving, steps = unzip_radial(curve)
    psi, cap_0 = _unzip_arcs([np.asarray(hull.points, dtype=complex)])
    image = CurvePath(_on_circle(psi.evaluate(np.asarray(curve.points, dtype=complex))), Chart.D)
    lhs = radial_energy(extract_radial_driving(image)) - radial_energy(driving)

    values = driving.values
    hull_points = np.array(hull.points, dtype=complex)
    schwarzians = np.empty(values.size)
    logs = np.empty(values.size)
    caps = np.empty(values.size)
    for k in range(values.size):
        if k > 0:
            hull_points = steps[k - 1].evaluate(hull_points)
        chain, caps[k] = _unzip_arcs([hull_points])
        _, slope, schwarzians[k] = _covering_values(chain, float(values[k]))
        logs[k] = math.log(slope)
    integral = float(np.trapezoid(schwarzians, driving.grid))
    quadrature = -3 * (logs[-1] - logs[0]) - 4 * integral
    loop_quadrature = -integral / 3 - (caps[-1] - caps[0]) / 8
    closed_form = 3 * math.log(psi.abs_derivative(curve.start)) - 1.5 * cap_0
    estimate = None
    if loop_params is not None:
        estimate = loop_mass_two_sets(curve, hull, DiskRegion(), loop_params, labels=("hull",))
    return HullIdentity(lhs, quadrature, loop_quadrature, closed_form, estimate)


@dataclass(frozen=True)
class BookkeepingTrace:
    """G_t sampled along the chordal chain."""

    times: np.ndarray
    values: np.ndarray

    @property
    def change(self) -> float:
        return float(self.values[-1] - self.values[0])


def forced_potential_bookkeeping(
    driving: DrivingFunction,
    hull: CurvePath,
    rho: float,
    force_point: float | None = None,
    stride: int = 1,
) -> BookkeepingTrace:
    """
    G_t = 3 log h'(W) + ρ log|(h(W) − h(V))/(W − V)| + (ρ(4+ρ)/4) log|h'(V)|.

    h_t removes the image of the hull under g_t; it is real on the real line
    away from the hull, so every term is evaluated at real W_t and V_t.
    """
    _require_kind(driving, DrivingKind.CHORDAL)
    rho = validate_rho(rho)
    trace = chordal_trace(driving)
    track = force_point_track(driving, force_point)
    hull_points = np.array(hull.points, dtype=complex)
    times = []
    values = []
    for k in range(driving.steps + 1):
        if k > 0:
            hull_points = trace.steps[k - 1].evaluate(hull_points)
        if k % stride and k != driving.steps:
            continue
        base = hull_points.copy()
        base[0] = base[0].real
        _, hull_steps = unzip_chordal(CurvePath(base, Chart.H))
        h = MapChain(hull_steps)
        w, v = float(driving.values[k]), float(track[k])
        hw, dw, _, _ = h.derivatives(np.asarray([complex(w)]))
        hv, dv, _, _ = h.derivatives(np.asarray([complex(v)]))
        if abs(v - w) < 1e-12:
            ratio = abs(dw[0])
        else:
            ratio = abs((hw[0] - hv[0]) / (w - v))
        values.append(
            3 * math.log(abs(dw[0]))
            + rho * math.log(ratio)
            + rho * (4 + rho) / 4 * math.log(abs(dv[0]))
        )
        times.append(float(driving.grid[k]))
    return BookkeepingTrace(np.array(times), np.array(values))


def restriction_weight(
    curve: CurvePath,
    region: Region,
    host: Region,
    kappa: float,
    params: LoopMassParams | None = None,
) -> Estimate:
    """(c(κ)/2)·𝔅(γ, host∖region; host), the generalized restriction exponent."""
    table = exponents(kappa)
    removed = ComplementRegion(host, region)
    mass = loop_mass_two_sets(curve, removed, host, params, labels=("restriction",))
    return mass.scaled(table.c / 2)
