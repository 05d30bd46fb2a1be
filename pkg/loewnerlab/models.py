"""Data models for loewnerlab."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np
from scipy import stats

from .errors import ErrorCode, InputError

# The point at infinity of the half-plane chart.
INFINITY = complex(math.inf, 0.0)


def is_infinite(z: complex) -> bool:
    """True for the marked point at infinity."""
    return not (math.isfinite(z.real) and math.isfinite(z.imag))


def _readonly(values: Any, dtype: Any) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def complex_to_json(z: complex) -> list[float] | str:
    """Encode a coordinate as [re, im], or "inf" for the point at infinity."""
    if is_infinite(z):
        return "inf"
    return [float(z.real), float(z.imag)]


def complex_from_json(value: Any) -> complex:
    """Decode [re, im], a bare real number, or "inf"."""
    if isinstance(value, str):
        if value.strip().lower() in {"inf", "infinity", "∞"}:
            return INFINITY
        raise InputError(
            code=ErrorCode.MALFORMED_INPUT,
            message="Unrecognized coordinate string",
            details={"value": value},
        )
    if isinstance(value, int | float):
        return complex(float(value), 0.0)
    if isinstance(value, Sequence) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise InputError(
        code=ErrorCode.MALFORMED_INPUT,
        message="Coordinates must be [re, im] pairs",
        details={"value": str(value)},
    )


class Chart(Enum):
    """Canonical domains."""

    H = "H"  # upper half-plane
    D = "D"  # unit disk


class DrivingKind(Enum):
    """Which Loewner equation a driving function feeds."""

    CHORDAL = "chordal"
    RADIAL = "radial"


@dataclass(frozen=True, eq=False)
class DrivingFunction:
    """Real driving path on a strictly increasing capacity grid starting at 0.

    W (chordal) or U (radial) is the piecewise-linear interpolant of `values`.
    """

    grid: np.ndarray
    values: np.ndarray
    kind: DrivingKind = DrivingKind.CHORDAL

    def __post_init__(self) -> None:
        grid = _readonly(self.grid, float)
        values = _readonly(self.values, float)
        if grid.ndim != 1 or values.shape != grid.shape:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="grid and values must be 1-D arrays of equal length",
                details={"grid": grid.shape, "values": values.shape},
            )
        if grid.size < 2:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="driving function needs at least 2 grid points",
                details={"points": int(grid.size)},
            )
        if abs(grid[0]) > 0.0:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="capacity grid must start at t=0",
                details={"t0": float(grid[0])},
            )
        if not np.all(np.diff(grid) > 0):
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="capacity grid must be strictly increasing",
            )
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(grid))):
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="non-finite driving data")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        horizon: float,
        steps: int,
        kind: DrivingKind = DrivingKind.CHORDAL,
    ) -> DrivingFunction:
        """Sample func on the uniform grid of `steps` intervals over [0, horizon]."""
        grid = np.linspace(0.0, horizon, steps + 1)
        return cls(grid, np.asarray(func(grid), dtype=float) * np.ones_like(grid), kind)

    @classmethod
    def constant(
        cls, horizon: float, steps: int, value: float = 0.0, kind: DrivingKind = DrivingKind.CHORDAL
    ) -> DrivingFunction:
        grid = np.linspace(0.0, horizon, steps + 1)
        return cls(grid, np.full_like(grid, value), kind)

    @classmethod
    def from_increments(
        cls, grid: np.ndarray, increments: np.ndarray, start: float = 0.0,
        kind: DrivingKind = DrivingKind.CHORDAL,
    ) -> DrivingFunction:
        values = start + np.concatenate([[0.0], np.cumsum(increments)])
        return cls(grid, values, kind)

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def steps(self) -> int:
        return int(self.grid.size - 1)

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.grid)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def value_at(self, t: float | np.ndarray) -> np.ndarray:
        """Piecewise-linear interpolation of the driving path."""
        return np.interp(t, self.grid, self.values)

    def truncate(self, horizon: float) -> DrivingFunction:
        """Restrict to [0, horizon], inserting an interpolated end point if needed."""
        if horizon >= self.horizon:
            return self
        keep = self.grid < horizon
        grid = np.append(self.grid[keep], horizon)
        values = np.append(self.values[keep], self.value_at(horizon))
        return DrivingFunction(grid, values, self.kind)

    def window(self, start_index: int, stop_index: int) -> DrivingFunction:
        """Sub-path between two grid indices, re-based to start at t=0."""
        grid = self.grid[start_index : stop_index + 1]
        return DrivingFunction(grid - grid[0], self.values[start_index : stop_index + 1], self.kind)

    def scaled(self, factor: float) -> DrivingFunction:
        """Brownian scaling t -> factor^2 t, W -> factor W."""
        return DrivingFunction(self.grid * factor**2, self.values * factor, self.kind)

    def shifted(self, offset: float) -> DrivingFunction:
        return DrivingFunction(self.grid, self.values + offset, self.kind)

    def with_values(self, values: np.ndarray) -> DrivingFunction:
        return DrivingFunction(self.grid, values, self.kind)


@dataclass(frozen=True, eq=False)
class CurvePath:
    """Ordered polyline in a canonical chart with optional capacity timestamps.

    `marked` names special points: "start", "end" (boundary endpoints of a
    chord or arc) and "interior" (the target of a radial arc).
    """

    points: np.ndarray
    chart: Chart = Chart.H
    times: np.ndarray | None = None
    marked: dict[str, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        points = _readonly(self.points, complex)
        if points.ndim != 1 or points.size < 2:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="a curve needs at least 2 points",
                details={"points": int(points.size)},
            )
        object.__setattr__(self, "points", points)
        if self.times is not None:
            times = _readonly(self.times, float)
            if times.shape != points.shape:
                raise InputError(
                    code=ErrorCode.MALFORMED_INPUT,
                    message="timestamps must match the points",
                )
            object.__setattr__(self, "times", times)
        object.__setattr__(self, "marked", dict(self.marked))

    @property
    def start(self) -> complex:
        return complex(self.points[0])

    @property
    def tip(self) -> complex:
        return complex(self.points[-1])

    @property
    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[:-1], self.points[1:]

    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.points))))

    def with_points(self, points: np.ndarray, chart: Chart | None = None) -> CurvePath:
        return replace(self, points=points, chart=chart or self.chart, times=None)

    def reversed(self) -> CurvePath:
        marked = dict(self.marked)
        if "start" in marked or "end" in marked:
            marked["start"], marked["end"] = (
                self.marked.get("end", self.tip),
                self.marked.get("start", self.start),
            )
        return CurvePath(self.points[::-1].copy(), self.chart, None, marked)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "chart": self.chart.value,
            "points": [[float(z.real), float(z.imag)] for z in self.points],
            "marked": {k: complex_to_json(v) for k, v in self.marked.items()},
        }
        if self.times is not None:
            data["times"] = [float(t) for t in self.times]
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CurvePath:
        try:
            chart = Chart(data["chart"])
            points = np.array([complex_from_json(p) for p in data["points"]], dtype=complex)
        except (KeyError, ValueError, TypeError) as e:
            raise InputError(
                code=ErrorCode.MALFORMED_INPUT,
                message="curve JSON needs 'chart' in {H, D} and a 'points' list",
                cause=e,
            ) from e
        marked = {k: complex_from_json(v) for k, v in data.get("marked", {}).items()}
        times = data.get("times")
        return cls(points, chart, None if times is None else np.asarray(times, float), marked)


@dataclass(frozen=True)
class MarkedConfiguration:
    """Domain with boundary points, optional interior point, links and SLE parameters."""

    chart: Chart
    boundary: tuple[complex, ...]
    interior: complex | None = None
    links: tuple[tuple[int, int], ...] = ()
    kappa: float | None = None
    rho: float | None = None
    mu: float = 0.0
    force_point: complex | None = None

    def __post_init__(self) -> None:
        finite = [z for z in self.boundary if not is_infinite(z)]
        for i, a in enumerate(finite):
            for b in finite[i + 1 :]:
                if abs(a - b) < 1e-12:
                    raise InputError(
                        code=ErrorCode.COINCIDENT_POINTS,
                        message="marked boundary points must be distinct",
                        details={"point": a},
                    )

    @property
    def n(self) -> int:
        """Number of curves: chord pairs (chordal) or arcs (radial)."""
        if self.interior is not None:
            return len(self.boundary)
        return max(len(self.links), len(self.boundary) // 2)

    @classmethod
    def chordal(cls, x: complex, y: complex, chart: Chart = Chart.H, **kwargs: Any) -> MarkedConfiguration:
        return cls(chart=chart, boundary=(complex(x), complex(y)), links=((0, 1),), **kwargs)

    @classmethod
    def radial(cls, xs: Sequence[complex], **kwargs: Any) -> MarkedConfiguration:
        return cls(chart=Chart.D, boundary=tuple(complex(x) for x in xs), interior=0j, **kwargs)


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo value with standard error, sample count and sampling window."""

    mean: float
    stderr: float
    n_samples: int
    window: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: np.ndarray, window: dict[str, Any] | None = None) -> Estimate:
        values = np.asarray(values, dtype=float)
        n = int(values.size)
        mean = float(values.mean()) if n else 0.0
        stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean, stderr, n, dict(window or {}))

    @classmethod
    def exact(cls, value: float, window: dict[str, Any] | None = None) -> Estimate:
        return cls(float(value), 0.0, 0, dict(window or {}))

    def merge(self, other: Estimate) -> Estimate:
        """Pool two independent batches of the same estimator (pairwise merge)."""
        n_a, n_b = self.n_samples, other.n_samples
        if n_a == 0:
            return other
        if n_b == 0:
            return self
        n = n_a + n_b
        var_a = (self.stderr * math.sqrt(n_a)) ** 2
        var_b = (other.stderr * math.sqrt(n_b)) ** 2
        delta = other.mean - self.mean
        mean = self.mean + delta * n_b / n
        m2 = var_a * (n_a - 1) + var_b * (n_b - 1) + delta**2 * n_a * n_b / n
        var = m2 / (n - 1)
        return Estimate(mean, math.sqrt(var / n), n, self.window)

    def minus(self, other: Estimate) -> Estimate:
        """Difference of independent estimates (errors added in quadrature)."""
        return Estimate(
            self.mean - other.mean,
            math.hypot(self.stderr, other.stderr),
            min(self.n_samples, other.n_samples),
            self.window,
        )

    def scaled(self, factor: float) -> Estimate:
        return Estimate(self.mean * factor, abs(factor) * self.stderr, self.n_samples, self.window)

    def upper_bound(self, confidence: float = 0.95) -> float:
        """One-sided normal upper confidence bound."""
        return self.mean + float(stats.norm.ppf(confidence)) * self.stderr

    def to_dict(self) -> dict[str, Any]:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n_samples,
            **{k: _json_window(v) for k, v in self.window.items()},
        }


def _json_window(value: Any) -> Any:
    if isinstance(value, complex):
        return complex_to_json(value)
    if isinstance(value, tuple | list):
        return [_json_window(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value
