"""Gradient descent on Loewner potentials over discretized driving functions.

The optimization variable is the vector of driving increments on a fixed
grid (concatenated over curves for multi-curve objectives). Gradients are
central differences evaluated on a thread pool. Steps are preconditioned by
the diagonal of the energy Hessian (12·Δt per increment) and accepted by
backtracking under the Armijo condition.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import OptimizerConfig, worker_count
from .energies import (
    PotentialReport,
    chordal_energy,
    forced_radial_energy,
    multiradial_potential,
    poisson_kernel,
    radial_energy,
    rho_energy,
)
from .errors import ErrorCode, InputError, LabError, OptimizationError, validate_rho
from .geometry import CAYLEY_H_TO_D, DiskRegion, chord_chart, polylines_intersect
from .loewner import chordal_trace
from .loopsoup import LoopMassParams, multi_cross_mass
from .models import Chart, CurvePath, DrivingFunction, DrivingKind, Estimate, MarkedConfiguration

logger = logging.getLogger("loewnerlab.optimizer")

OBJECTIVE_KINDS = ("chordal", "rho", "radial", "rho-radial", "multi-chordal", "multi-radial")
LOOP_MODES = ("off", "frozen", "full")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which potential to minimize, on which grid, with which loop-term handling."""

    kind: str = "chordal"
    horizon: float = 1.0
    steps: int = 20
    rho: float | None = None
    n: int = 1
    mu: float = 0.0
    config: MarkedConfiguration | None = None
    loop_mode: str = "frozen"
    loop_params: LoopMassParams = field(default_factory=LoopMassParams)

    def __post_init__(self) -> None:
        if self.kind not in OBJECTIVE_KINDS:
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message=f"Unsupported objective: {self.kind}",
                details={"kind": self.kind, "supported": list(OBJECTIVE_KINDS)},
            )
        if self.loop_mode not in LOOP_MODES:
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message=f"Unsupported loop mode: {self.loop_mode}",
                details={"loop_mode": self.loop_mode},
            )
        if self.steps < 2 or not self.horizon > 0:
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message="objective grid needs N >= 2 and a positive horizon",
                details={"steps": self.steps, "horizon": self.horizon},
            )
        if self.kind in ("rho", "rho-radial"):
            validate_rho(self.rho)
        if self.kind == "multi-chordal" and (self.config is None or not self.config.links):
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="multi-chordal objectives need a configuration with links",
            )

    @property
    def curves(self) -> int:
        if self.kind == "multi-chordal":
            return len(self.config.links)  # type: ignore[union-attr]
        if self.kind == "multi-radial":
            return self.n
        return 1

    @property
    def driving_kind(self) -> DrivingKind:
        return DrivingKind.RADIAL if self.kind in ("radial", "rho-radial", "multi-radial") else DrivingKind.CHORDAL

    def starts(self) -> list[float]:
        """Driver start values; multi-radial arcs start at equal angles 2πj/n."""
        if self.kind == "multi-radial":
            return [2 * math.pi * j / self.n for j in range(self.n)]
        return [0.0] * self.curves

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "horizon": self.horizon,
            "steps": self.steps,
            "rho": self.rho,
            "n": self.n,
            "mu": self.mu,
            "loop_mode": self.loop_mode,
            "loop_seed": self.loop_params.seed,
        }


@dataclass(frozen=True)
class OptimizationResult:
    """Terminal drivers, their potential report and the descent history."""

    drivers: list[DrivingFunction]
    report: PotentialReport
    objective_trace: list[float]
    accepted: int
    rejected: int
    reason: str
    loop_seeds: list[int] = field(default_factory=list)
    refreshes: list[int] = field(default_factory=list)  # trace indices where a new loop estimate starts

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def segments(self) -> list[list[float]]:
        """The objective trace split at loop refreshes; each piece is non-increasing."""
        bounds = [0, *self.refreshes, len(self.objective_trace)]
        return [self.objective_trace[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]

    def to_dict(self) -> dict[str, Any]:
        return {
            "drivers": [
                {"grid": d.grid.tolist(), "values": d.values.tolist(), "kind": d.kind.value}
                for d in self.drivers
            ],
            "report": self.report.to_dict(),
            "objective_trace": self.objective_trace,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reason": self.reason,
            "loop_seeds": self.loop_seeds,
            "refreshes": self.refreshes,
        }


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------


def energy_gradient(driving: DrivingFunction) -> np.ndarray:
    """Gradient of the Dirichlet energy with respect to the increments: ΔW/Δt."""
    return driving.increments / driving.dt


class PotentialObjective:
    """Potential of the drivers encoded by an increment vector."""

    def __init__(self, spec: ObjectiveSpec) -> None:
        self.spec = spec
        self.grid = np.linspace(0.0, spec.horizon, spec.steps + 1)
        self.metric = np.tile(12 * np.diff(self.grid), spec.curves)
        self._frozen_loop: Estimate | None = None
        self.loop_seeds: list[int] = []

    @property
    def size(self) -> int:
        return self.spec.steps * self.spec.curves

    def encode(self, drivers: Sequence[DrivingFunction]) -> np.ndarray:
        return np.concatenate([d.increments for d in drivers])

    def drivers(self, x: np.ndarray) -> list[DrivingFunction]:
        parts = np.split(np.asarray(x, dtype=float), self.spec.curves)
        return [
            DrivingFunction.from_increments(self.grid, part, start, self.spec.driving_kind)
            for part, start in zip(parts, self.spec.starts(), strict=True)
        ]

    def refresh_loop(self, x: np.ndarray) -> None:
        """Re-estimate the frozen loop term at x (same seed every time)."""
        if self.spec.kind == "multi-chordal" and self.spec.loop_mode == "frozen":
            curves = self._chords(self.drivers(x))
            self._frozen_loop = self._loop(curves) if curves is not None else None

    def __call__(self, x: np.ndarray) -> float:
        try:
            return self.report(x).total
        except LabError:
            return math.inf

    def report(self, x: np.ndarray) -> PotentialReport:
        spec = self.spec
        drivers = self.drivers(x)
        kernel_term = 0.0
        if spec.config is not None and spec.kind in ("chordal", "rho"):
            coefficient = 0.25 if spec.kind == "chordal" else (spec.rho + 2) * (spec.rho + 6) / 48  # type: ignore[operator]
            kernel_term = -coefficient * math.log(poisson_kernel(spec.config))
        if spec.kind == "chordal":
            energy = chordal_energy(drivers[0])
        elif spec.kind == "rho":
            energy = rho_energy(drivers[0], float(spec.rho))  # type: ignore[arg-type]
        elif spec.kind == "radial":
            energy = radial_energy(drivers[0])
        elif spec.kind == "rho-radial":
            energy = forced_radial_energy(drivers[0], float(spec.rho))  # type: ignore[arg-type]
        elif spec.kind == "multi-radial":
            return multiradial_potential(drivers, mu=spec.mu)
        else:
            return self._multichordal_report(drivers)
        return PotentialReport(
            spec.kind,
            energy,
            {"energy": energy / 12, "kernel": kernel_term},
            None,
            spec.horizon,
            True,
        )

    def _chords(self, drivers: Sequence[DrivingFunction]) -> list[CurvePath] | None:
        """Chords of the link pattern; None when two of them meet."""
        config = self.spec.config
        curves = []
        for (a, b), driving in zip(config.links, drivers, strict=True):  # type: ignore[union-attr]
            normalized = chordal_trace(driving).curve
            back = chord_chart(config.boundary[a], config.boundary[b]).inverse()  # type: ignore[union-attr]
            curves.append(CurvePath(back.evaluate(normalized.points), Chart.H))
        for i, first in enumerate(curves):
            for second in curves[i + 1 :]:
                if polylines_intersect(first.points, second.points):
                    return None
        return curves

    def _loop(self, curves: Sequence[CurvePath]) -> Estimate:
        disk = [CurvePath(CAYLEY_H_TO_D.evaluate(c.points), Chart.D) for c in curves]
        params = self.spec.loop_params
        if params.seed not in self.loop_seeds:
            self.loop_seeds.append(params.seed)
        return multi_cross_mass(disk, DiskRegion(), params, labels=("objective",))

    def _multichordal_report(self, drivers: Sequence[DrivingFunction]) -> PotentialReport:
        spec = self.spec
        config = spec.config
        curves = self._chords(drivers)
        energy = sum(chordal_energy(d) for d in drivers)
        if curves is None:
            return PotentialReport("multi-chordal", energy, {"energy": math.inf}, None, spec.horizon, True)
        kernel_term = 0.0
        for a, b in config.links:  # type: ignore[union-attr]
            pair = MarkedConfiguration.chordal(config.boundary[a], config.boundary[b])  # type: ignore[union-attr]
            kernel_term -= 0.25 * math.log(poisson_kernel(pair))
        if spec.loop_mode == "off":
            loop = None
        elif spec.loop_mode == "full" or self._frozen_loop is None:
            loop = self._loop(curves)
        else:
            loop = self._frozen_loop
        return PotentialReport(
            "multi-chordal",
            energy,
            {"energy": energy / 12, "kernel": kernel_term},
            loop,
            spec.horizon,
            True,
            {"loop_mode": spec.loop_mode},
        )


# ---------------------------------------------------------------------------
# Descent
# ---------------------------------------------------------------------------


def finite_diff_gradient(
    objective: Callable[[np.ndarray], float],
    point: np.ndarray,
    h: float,
    workers: int | None = None,
) -> np.ndarray:
    """
    Central-difference gradient, one coordinate per pool task.

    Raises:
        LabError: If h <= 0.
        OptimizationError: If the objective is not finite near the point.
    """
    if not h > 0:
        raise LabError(code=ErrorCode.INVALID_PARAMETER, message="h must be positive", details={"h": h})
    point = np.asarray(point, dtype=float)

    def partial(i: int) -> float:
        up = point.copy()
        down = point.copy()
        up[i] += h
        down[i] -= h
        return (objective(up) - objective(down)) / (2 * h)

    with ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
        gradient = np.array(list(pool.map(partial, range(point.size))))
    if not np.all(np.isfinite(gradient)):
        raise OptimizationError(
            code=ErrorCode.NON_FINITE_OBJECTIVE,
            message="objective is not finite around the point",
            details={"coordinates": int(np.sum(~np.isfinite(gradient)))},
        )
    return gradient


def minimize_potential(
    spec: ObjectiveSpec,
    init: DrivingFunction | Sequence[DrivingFunction] | None = None,
    options: OptimizerConfig | None = None,
    workers: int | None = None,
) -> OptimizationResult:
    """
    Minimize the potential of `spec` starting from `init` (zero increments by default).

    Raises:
        OptimizationError: If the initial objective is not finite.
    """
    options = options or OptimizerConfig()
    objective = PotentialObjective(spec)
    if init is None:
        x = np.zeros(objective.size)
    else:
        drivers = [init] if isinstance(init, DrivingFunction) else list(init)
        x = objective.encode(drivers)
        if x.size != objective.size:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="initial drivers do not match the objective grid",
                details={"expected": objective.size, "got": int(x.size)},
            )
    objective.refresh_loop(x)
    value = objective(x)
    if not math.isfinite(value):
        raise OptimizationError(
            code=ErrorCode.NON_FINITE_OBJECTIVE,
            message="initial objective is not finite",
        )
    trace = [value]
    refreshes: list[int] = []
    accepted = rejected = 0
    step = options.initial_step
    reason = "max_iter"
    for iteration in range(options.max_iter):
        if spec.loop_mode == "frozen" and iteration and iteration % options.refresh_every == 0:
            objective.refresh_loop(x)
            refreshed = objective(x)
            if refreshed != value:
                refreshes.append(len(trace))
                trace.append(refreshed)
            value = refreshed
        gradient = finite_diff_gradient(objective, x, options.fd_step, workers)
        if float(np.linalg.norm(gradient)) < options.grad_tol:
            reason = "gradient"
            break
        direction = -objective.metric * gradient
        slope = float(gradient @ direction)
        step = min(options.initial_step, 2 * step)
        while step >= options.step_tol:
            candidate = x + step * direction
            new_value = objective(candidate)
            if math.isfinite(new_value) and new_value <= value + options.armijo * step * slope:
                break
            if not math.isfinite(new_value):
                logger.debug("Rejected non-finite step", extra={"iteration": iteration, "step": step})
            rejected += 1
            step *= options.shrink
        else:
            reason = "step"
            break
        x = candidate
        value = new_value
        trace.append(value)
        accepted += 1
    report = objective.report(x)
    logger.info(
        "Finished potential minimization",
        extra={
            "kind": spec.kind,
            "objective": value,
            "accepted": accepted,
            "rejected": rejected,
            "reason": reason,
        },
    )
    return OptimizationResult(
        objective.drivers(x),
        report,
        trace,
        accepted,
        rejected,
        reason,
        list(objective.loop_seeds),
        refreshes,
    )
