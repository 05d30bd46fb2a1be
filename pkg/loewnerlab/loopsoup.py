"""Monte Carlo masses of the Brownian loop measure.

The loop measure is sampled by importance: roots uniform on a box B,
durations with density ∝ t^{-2} on [t_min, t_max], and a Brownian bridge of
that duration discretized at m points. Each sample carries the weight

    |B| (1/t_min − 1/t_max) / (2π)

so the mean of weight × indicator estimates the windowed mass. Loops
shorter than t_min cannot reach across a gap of d = dist(V1, V2) except
with Gaussian-tail probability; the induced bias is bounded and reported,
along with bounds for loops longer than t_max and, on unbounded domains,
for loops rooted outside B.

A random-walk loop soup on hℤ² gives an independent (slow) oracle.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from scipy import integrate, special

from .config import LoopSoupConfig, worker_count
from .errors import ErrorCode, GeometryError, LabError, SamplingError
from .geometry import (
    ComplementRegion,
    DiskRegion,
    HalfPlaneRegion,
    PolygonRegion,
    Region,
    TubeRegion,
    polyline_distance,
    polylines_intersect,
)
from .models import Chart, CurvePath, Estimate
from .rng import stream

logger = logging.getLogger("loewnerlab.loopsoup")


@dataclass(frozen=True)
class CurveSet:
    """Union of curves hit as one target (the arcs of a multi-arc)."""

    curves: tuple[CurvePath, ...]


Target = CurvePath | CurveSet | Region
Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class LoopMassParams:
    """Sampling budget and window of one loop-mass estimate."""

    n_samples: int = 100_000
    bridge_points: int = 256
    t_min: float | None = None  # default (d / t_min_divisor)^2
    t_max: float | None = None  # default t_max_factor * (box side)^2
    box_margin: float = 0.5
    seed: int = 20240601
    batch_size: int = 4096
    clearance: float = 0.0
    t_min_divisor: float = 8.0
    t_max_factor: float = 1.0
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.n_samples < 1 or self.bridge_points < 4 or self.batch_size < 1:
            raise LabError(
                code=ErrorCode.INVALID_PARAMETER,
                message="loop sampling needs n_samples >= 1, bridge_points >= 4, batch_size >= 1",
                details={
                    "n_samples": self.n_samples,
                    "bridge_points": self.bridge_points,
                    "batch_size": self.batch_size,
                },
            )

    @classmethod
    def from_config(cls, config: LoopSoupConfig, seed: int, **overrides: Any) -> LoopMassParams:
        params = cls(
            n_samples=config.n_samples,
            bridge_points=config.bridge_points,
            box_margin=config.box_margin,
            seed=seed,
            batch_size=config.batch_size,
            clearance=config.clearance,
            t_min_divisor=config.t_min_divisor,
            t_max_factor=config.t_max_factor,
        )
        return replace(params, **overrides)


@dataclass(frozen=True)
class LoopSample:
    """One rooted loop: root, duration, bridge polyline and importance weight."""

    root: complex
    duration: float
    path: np.ndarray
    weight: float


@dataclass(frozen=True)
class LoopBatch:
    """A batch of loops sharing one importance weight."""

    roots: np.ndarray  # (B,)
    durations: np.ndarray  # (B,)
    paths: np.ndarray  # (B, m + 1), path[:, 0] == path[:, -1] == root
    weight: float

    def __len__(self) -> int:
        return int(self.roots.size)

    def __getitem__(self, index: int) -> LoopSample:
        return LoopSample(
            complex(self.roots[index]), float(self.durations[index]), self.paths[index], self.weight
        )


@dataclass(frozen=True)
class LoopWindow:
    """Sampling window: duration range, root box and truncation bias bound."""

    t_min: float
    t_max: float
    box: Box
    gap: float
    bias_bound: float
    seed: int
    box_bias_bound: float = 0.0  # loops of `domain` rooted outside the box
    long_bias_bound: float = 0.0  # loops longer than t_max

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.box
        return (x1 - x0) * (y1 - y0)

    @property
    def weight(self) -> float:
        return self.area * (1.0 / self.t_min - 1.0 / self.t_max) / (2 * math.pi)

    def to_dict(self) -> dict[str, Any]:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "box": list(self.box),
            "gap": self.gap,
            "bias_bound": self.bias_bound,
            "box_bias_bound": self.box_bias_bound,
            "long_bias_bound": self.long_bias_bound,
            "total_bias_bound": self.bias_bound + self.box_bias_bound + self.long_bias_bound,
            "seed": self.seed,
        }


def truncation_bias_bound(area: float, gap: float, t_min: float) -> float:
    """
    Upper bound on the mass of loops shorter than t_min reaching across `gap`.

    A bridge of duration t leaves the disk of radius gap/2 around its root
    with probability at most 4 exp(−gap²/(4t)); integrating against
    dt/(2πt²) over (0, t_min) gives 8|B|/(π gap²) · exp(−gap²/(4 t_min)).
    """
    if gap <= 0:
        return math.inf
    return 8 * area / (math.pi * gap**2) * math.exp(-(gap**2) / (4 * t_min))


def interval_stay_bound(t: float, width: float) -> float:
    """Upper bound on P(a 1D Brownian bridge of duration t stays in an interval of this width)."""
    q = math.exp(-(math.pi**2) * t / (2 * width**2))
    if q >= 1.0:
        return 1.0
    # Dirichlet kernel over the free kernel, with Σ q^{k²} ≤ q/(1 − q)
    return min(1.0, math.sqrt(2 * math.pi * t) * 2 / width * q / (1 - q))


def strip_crossing_bound(length: float) -> float:
    """
    Upper bound on the mass of loops in the strip 0 < Im z < π meeting both
    Re z ≤ 0 and Re z ≥ `length`.

    A loop rooted at x must reach distance max(x, length − x); bridge tails
    give 2 exp(−2a²/t), and staying in the strip costs interval_stay_bound.
    Through log z this bounds the half-plane loops joining the half-disks of
    radius s and the outside of radius s·e^{length}.
    """
    if length <= 0:
        return math.inf

    def density(t: float) -> float:
        if t <= 0:
            return 0.0
        reach = math.sqrt(math.pi * t / 2) * special.erfc(length / math.sqrt(2 * t))
        return interval_stay_bound(t, math.pi) * reach / t**2

    value, _ = integrate.quad(density, 0.0, math.inf, limit=200)
    return float(value)


def box_bias_bound(domain: Region, targets: Sequence[Target], box: Box) -> float:
    """
    Mass of loops of `domain` that hit the targets but are rooted outside `box`.

    Zero when the box covers a bounded domain. For domains of the upper
    half-plane the loops must cross from the half-disk around the targets to
    the box edge; other unbounded domains get no finite bound.
    """
    if domain.bounding_box() is not None:
        return 0.0
    if domain.chart is not Chart.H:
        return math.inf
    pts = np.concatenate([_target_samples(t) for t in targets])
    x0, x1, y0, y1 = box
    if y0 > 0:
        return math.inf
    center = 0.5 * (float(pts.real.min()) + float(pts.real.max()))
    inner = float(np.abs(pts - center).max())
    outer = min(center - x0, x1 - center, y1)
    if not 0 < inner < outer:
        return math.inf
    return strip_crossing_bound(math.log(outer / inner))


def long_loop_bias_bound(domain: Region, box: Box, t_max: float) -> float:
    """Mass of loops rooted in `box` that stay in `domain` for longer than t_max."""
    x0, x1, y0, y1 = box
    area = (x1 - x0) * (y1 - y0)
    if domain.bounding_box() is not None:
        width = min(x1 - x0, y1 - y0)

        def stay(t: float) -> float:
            return interval_stay_bound(t, width)

    elif domain.chart is Chart.H:
        # a bridge rooted at height y ≤ y1 stays above ℝ with probability 1 − e^{−2y²/t}
        def stay(t: float) -> float:
            return min(1.0, 2 * y1**2 / t)

    else:
        return area / (2 * math.pi * t_max)
    value, _ = integrate.quad(lambda t: stay(t) / t**2, t_max, math.inf, limit=200)
    return area / (2 * math.pi) * float(value)


def _window(
    t_min: float, t_max: float, box: Box, gap: float, domain: Region, targets: Sequence[Target], seed: int
) -> LoopWindow:
    area = (box[1] - box[0]) * (box[3] - box[2])
    return LoopWindow(
        t_min,
        t_max,
        box,
        gap,
        truncation_bias_bound(area, gap, t_min),
        seed,
        box_bias_bound(domain, targets, box),
        long_loop_bias_bound(domain, box, t_max),
    )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def bridge_paths(
    rng: np.random.Generator, durations: np.ndarray, points: int
) -> np.ndarray:
    """Planar Brownian bridges from 0 to 0 with `points` steps, one row per duration."""
    count = durations.size
    steps = rng.standard_normal((count, points)) + 1j * rng.standard_normal((count, points))
    steps *= np.sqrt(durations / points)[:, None]
    walk = np.concatenate([np.zeros((count, 1), complex), np.cumsum(steps, axis=1)], axis=1)
    ramp = np.linspace(0.0, 1.0, points + 1)[None, :]
    return walk - ramp * walk[:, -1:]


def sample_loops(params: LoopMassParams, window: LoopWindow, count: int, *labels: Any) -> LoopBatch:
    """Draw `count` loops of the window from the stream (seed, "loops", *labels)."""
    rng = stream(params.seed, "loops", *labels)
    x0, x1, y0, y1 = window.box
    roots = rng.uniform(x0, x1, count) + 1j * rng.uniform(y0, y1, count)
    # inverse CDF of the density ∝ t^{-2} on [t_min, t_max]
    u = rng.uniform(0.0, 1.0, count)
    inv = 1.0 / window.t_min - u * (1.0 / window.t_min - 1.0 / window.t_max)
    durations = 1.0 / inv
    paths = roots[:, None] + bridge_paths(rng, durations, params.bridge_points)
    return LoopBatch(roots, durations, paths, window.weight)


# ---------------------------------------------------------------------------
# Hitting tests
# ---------------------------------------------------------------------------


def _step_radius(paths: np.ndarray) -> np.ndarray:
    """Half of the longer adjacent bridge step at each vertex."""
    seg = np.abs(np.diff(paths, axis=1))
    left = np.concatenate([seg[:, -1:], seg], axis=1)
    right = np.concatenate([seg, seg[:, :1]], axis=1)
    return 0.5 * np.maximum(left, right)


def _bbox(points: np.ndarray) -> Box:
    return (
        float(points.real.min()),
        float(points.real.max()),
        float(points.imag.min()),
        float(points.imag.max()),
    )


def _hits_curve(paths: np.ndarray, curve: CurvePath, clearance: float) -> np.ndarray:
    """Loops passing within clearance of the polyline (between vertices included)."""
    pts = curve.points[np.isfinite(curve.points)]
    radius = _step_radius(paths) + clearance
    r_max = float(radius.max()) if radius.size else 0.0
    x0, x1, y0, y1 = _bbox(pts)
    near = (
        (paths.real >= x0 - r_max)
        & (paths.real <= x1 + r_max)
        & (paths.imag >= y0 - r_max)
        & (paths.imag <= y1 + r_max)
    )
    hit = np.zeros(paths.shape[0], dtype=bool)
    rows, cols = np.nonzero(near)
    if rows.size == 0:
        return hit
    dist = polyline_distance(paths[rows, cols], pts)
    close = dist <= radius[rows, cols]
    hit[rows[close]] = True
    return hit


def _hits_region(paths: np.ndarray, region: Region) -> np.ndarray:
    inside = region.inside(paths.ravel()).reshape(paths.shape)
    return inside.any(axis=1)


def _stays_in(paths: np.ndarray, region: Region) -> np.ndarray:
    inside = region.inside(paths.ravel()).reshape(paths.shape)
    return inside.all(axis=1)


def _hits(paths: np.ndarray, target: Target, clearance: float) -> np.ndarray:
    if isinstance(target, CurveSet):
        hit = np.zeros(paths.shape[0], dtype=bool)
        for curve in target.curves:
            hit |= _hits_curve(paths, curve, clearance)
        return hit
    if isinstance(target, CurvePath):
        return _hits_curve(paths, target, clearance)
    return _hits_region(paths, target)


def _refine(mask: np.ndarray, paths: np.ndarray, test) -> np.ndarray:
    """Apply `test` to the loops still alive in `mask` only."""
    alive = np.nonzero(mask)[0]
    if alive.size == 0:
        return mask
    out = mask.copy()
    out[alive] = test(paths[alive])
    return out


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------


def _target_samples(target: Target) -> np.ndarray:
    """Points of the target set used to measure gaps."""
    if isinstance(target, CurveSet):
        return np.concatenate([_target_samples(c) for c in target.curves])
    if isinstance(target, CurvePath):
        return target.points[np.isfinite(target.points)]
    return _interior_boundary(target)


def _in_host(z: np.ndarray, chart: Chart, tol: float = 1e-9) -> np.ndarray:
    if chart is Chart.H:
        return z.imag > tol
    return np.abs(z) < 1 - tol


def _interior_boundary(region: Region) -> np.ndarray:
    """Samples of the part of a region's boundary that lies inside its host domain."""
    if isinstance(region, ComplementRegion):
        pts = _interior_boundary(region.removed)
        return pts[region.host.inside(pts)] if pts.size else pts
    if isinstance(region, PolygonRegion):
        pts = region.boundary
        return pts[_in_host(pts, region.chart)]
    if isinstance(region, TubeRegion):
        curve = region.curve.points
        normals = np.exp(1j * np.linspace(0, 2 * math.pi, 16, endpoint=False))
        pts = (curve[:, None] + region.eps * normals[None, :]).ravel()
        far = polyline_distance(pts, curve) >= region.eps * (1 - 1e-9)
        pts = pts[far]
        return pts[_in_host(pts, region.chart)]
    if isinstance(region, DiskRegion):
        return region.center + region.radius * np.exp(1j * np.linspace(0, 2 * math.pi, 512))
    raise GeometryError(
        code=ErrorCode.INVALID_PARAMETER,
        message="unsupported target region",
        details={"region": type(region).__name__},
    )


def target_gap(first: Target, second: Target) -> float:
    """Distance between two target sets (0 when they meet)."""
    if isinstance(first, CurveSet):
        return min(target_gap(c, second) for c in first.curves)
    if isinstance(second, CurveSet):
        return min(target_gap(first, c) for c in second.curves)
    if isinstance(first, Region) and isinstance(second, CurvePath):
        first, second = second, first
    a = _target_samples(first)
    b = _target_samples(second)
    if a.size == 0 or b.size == 0:
        return math.inf
    if isinstance(first, CurvePath) and isinstance(second, CurvePath):
        if a.size >= 2 and b.size >= 2 and polylines_intersect(a, b):
            return 0.0
        return float(min(polyline_distance(a, b).min(), polyline_distance(b, a).min()))
    if isinstance(first, CurvePath):
        if np.any(second.inside(a)):
            return 0.0
        return float(polyline_distance(b, a).min())
    return float(np.abs(a[:, None] - b[None, :]).min())


def _domain_box(domain: Region, targets: Sequence[Target], margin: float) -> Box:
    box = domain.bounding_box()
    if box is not None:
        return box
    pts = np.concatenate([_target_samples(t) for t in targets])
    x0, x1, y0, y1 = _bbox(pts)
    diam = max(x1 - x0, y1 - y0, 1e-12)
    pad = margin * diam
    y_low = y0 - pad
    if isinstance(domain, HalfPlaneRegion):
        y_low = max(y_low, 0.0)
    return x0 - pad, x1 + pad, y_low, y1 + pad


def loop_window(
    targets: Sequence[Target], domain: Region, params: LoopMassParams
) -> LoopWindow:
    """
    Window for loops of `domain` that hit at least two of the targets.

    Raises:
        GeometryError: if two targets meet (zero gap).
        SamplingError: if the duration window is empty.
    """
    gap = math.inf
    for i, a in enumerate(targets):
        for b in targets[i + 1 :]:
            gap = min(gap, target_gap(a, b))
    if gap <= 0:
        raise GeometryError(
            code=ErrorCode.INTERSECTING_CURVES,
            message="loop targets must be disjoint",
            details={"gap": gap},
        )
    box = _domain_box(domain, targets, params.box_margin)
    side = max(box[1] - box[0], box[3] - box[2])
    if not math.isfinite(gap):
        gap = side
    t_min = params.t_min if params.t_min is not None else (gap / params.t_min_divisor) ** 2
    t_max = params.t_max if params.t_max is not None else params.t_max_factor * side**2
    if not 0 < t_min < t_max:
        raise SamplingError(
            code=ErrorCode.DEGENERATE_WINDOW,
            message="loop duration window is empty",
            details={"t_min": t_min, "t_max": t_max},
        )
    return _window(t_min, t_max, box, gap, domain, targets, params.seed)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _batches(params: LoopMassParams) -> list[tuple[int, int]]:
    out = []
    for index, start in enumerate(range(0, params.n_samples, params.batch_size)):
        out.append((index, min(params.batch_size, params.n_samples - start)))
    return out


def _estimate(
    params: LoopMassParams,
    window: LoopWindow,
    score,
    labels: tuple[Any, ...],
) -> Estimate:
    """Run the batches through a thread pool and merge in batch order."""

    def run(batch: tuple[int, int]) -> Estimate:
        index, count = batch
        loops = sample_loops(params, window, count, *labels, index)
        return Estimate.from_values(loops.weight * score(loops.paths))

    batches = _batches(params)
    with ThreadPoolExecutor(max_workers=worker_count(params.workers)) as pool:
        parts = list(pool.map(run, batches))
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return Estimate(total.mean, total.stderr, total.n_samples, window.to_dict())


def _two_set_score(
    first: Target,
    second: Target,
    domain: Region,
    clearance: float,
    within: Region | None = None,
):
    def score(paths: np.ndarray) -> np.ndarray:
        # cheap curve tests first, region tests on survivors only
        ordered = sorted([first, second], key=lambda t: isinstance(t, Region))
        mask = np.ones(paths.shape[0], dtype=bool)
        for target in ordered:
            mask = _refine(mask, paths, lambda p, t=target: _hits(p, t, clearance))
        mask = _refine(mask, paths, lambda p: _stays_in(p, domain))
        if within is not None:
            mask = _refine(mask, paths, lambda p: _stays_in(p, within))
        return mask.astype(float)

    return score


def loop_mass_two_sets(
    first: Target,
    second: Target,
    domain: Region,
    params: LoopMassParams | None = None,
    within: Region | None = None,
    labels: tuple[Any, ...] = (),
) -> Estimate:
    """
    Mass of loops staying in `domain` that hit both `first` and `second`.

    `within` adds a stay-in-region indicator on the same samples. Two calls
    with the same params and labels see identical loops.

    Raises:
        GeometryError: if the two sets meet.
    """
    params = params or LoopMassParams()
    window = loop_window([first, second], domain, params)
    score = _two_set_score(first, second, domain, params.clearance, within)
    estimate = _estimate(params, window, score, ("two-sets", *labels))
    logger.debug(
        "Estimated two-set loop mass",
        extra={
            "mean": estimate.mean,
            "stderr": estimate.stderr,
            "n_samples": estimate.n_samples,
            "t_min": window.t_min,
            "gap": window.gap,
        },
    )
    return estimate


def loop_mass_difference(
    first_pair: tuple[Target, Target],
    second_pair: tuple[Target, Target],
    domain: Region,
    params: LoopMassParams | None = None,
    labels: tuple[Any, ...] = (),
) -> Estimate:
    """
    𝔅(a₁, a₂; D) − 𝔅(b₁, b₂; D) scored loop by loop on one shared sample.

    The window covers both pairs (smallest t_min, union box), so the
    difference is exactly 0 when the pairs coincide.

    Raises:
        GeometryError: if the sets of either pair meet.
    """
    params = params or LoopMassParams()
    windows = [loop_window(list(pair), domain, params) for pair in (first_pair, second_pair)]
    box = _domain_box(domain, [*first_pair, *second_pair], params.box_margin)
    gap = min(w.gap for w in windows)
    t_min = min(w.t_min for w in windows)
    t_max = max(w.t_max for w in windows)
    window = _window(t_min, t_max, box, gap, domain, [*first_pair, *second_pair], params.seed)
    first_score = _two_set_score(*first_pair, domain, params.clearance)
    second_score = _two_set_score(*second_pair, domain, params.clearance)

    def score(paths: np.ndarray) -> np.ndarray:
        return first_score(paths) - second_score(paths)

    estimate = _estimate(params, window, score, ("difference", *labels))
    logger.debug(
        "Estimated paired loop-mass difference",
        extra={"mean": estimate.mean, "stderr": estimate.stderr, "t_min": t_min, "gap": gap},
    )
    return estimate


def multi_cross_mass(
    curves: Sequence[CurvePath],
    domain: Region,
    params: LoopMassParams | None = None,
    labels: tuple[Any, ...] = (),
) -> Estimate:
    """Integral of max(#curves hit − 1, 0) over loops staying in `domain`."""
    params = params or LoopMassParams()
    if len(curves) < 2:
        return Estimate.exact(0.0, {"reason": "single curve"})
    window = loop_window(list(curves), domain, params)
    clearance = params.clearance

    def score(paths: np.ndarray) -> np.ndarray:
        stays = _stays_in(paths, domain)
        counts = np.zeros(paths.shape[0])
        alive = np.nonzero(stays)[0]
        for curve in curves:
            if alive.size:
                counts[alive] += _hits_curve(paths[alive], curve, clearance)
        return np.maximum(counts - 1, 0)

    return _estimate(params, window, score, ("multi-cross", *labels))


# ---------------------------------------------------------------------------
# Random-walk oracle
# ---------------------------------------------------------------------------


def return_probability(k: np.ndarray) -> np.ndarray:
    """P(planar simple random walk is back at 0 after 2k steps) = (C(2k,k)/4^k)²."""
    k = np.asarray(k, dtype=float)
    log_p = special.gammaln(2 * k + 1) - 2 * special.gammaln(k + 1) - k * math.log(4)
    return np.exp(2 * log_p)


def _lattice_loop(rng: np.random.Generator, k: int) -> np.ndarray:
    """Uniform closed walk of 2k steps: two independent ±1 bridges in rotated coordinates."""
    base = np.concatenate([np.ones(k), -np.ones(k)])
    u = np.concatenate([[0.0], np.cumsum(rng.permutation(base))])
    v = np.concatenate([[0.0], np.cumsum(rng.permutation(base))])
    return 0.5 * (u + v) + 0.5j * (u - v)


def lattice_loop_mass(
    first: Target,
    second: Target,
    domain: Region,
    h: float,
    n_samples: int,
    seed: int,
    k_max: int | None = None,
) -> Estimate:
    """
    Random-walk loop-soup estimate of the two-set loop mass on hℤ².

    Rooted lattice loops of length 2k carry mass p_{2k}/(2k) per site. Roots
    are uniform over lattice sites of the domain and k is drawn ∝ p_{2k}/(2k)
    on [k_min, k_max], where loops of fewer steps cannot span the gap.
    """
    box = domain.bounding_box()
    if box is None:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="the lattice oracle needs a bounded domain",
        )
    gap = target_gap(first, second)
    if gap <= 0:
        raise GeometryError(code=ErrorCode.INTERSECTING_CURVES, message="loop targets must be disjoint")
    xs = np.arange(math.ceil(box[0] / h), math.floor(box[1] / h) + 1) * h
    ys = np.arange(math.ceil(box[2] / h), math.floor(box[3] / h) + 1) * h
    grid = (xs[:, None] + 1j * ys[None, :]).ravel()
    sites = grid[domain.inside(grid)]
    if sites.size == 0:
        raise SamplingError(code=ErrorCode.DEGENERATE_WINDOW, message="no lattice sites in the domain")
    reach = max(gap - h, h)
    k_min = max(1, math.ceil(reach / h))
    side = max(box[1] - box[0], box[3] - box[2])
    k_max = k_max or max(k_min + 1, int(4 * (side / h) ** 2))
    ks = np.arange(k_min, k_max + 1)
    masses = return_probability(ks) / (2 * ks)
    mass_per_site = float(masses.sum())
    weight = sites.size * mass_per_site
    rng = stream(seed, "lattice-loops")
    roots = sites[rng.integers(0, sites.size, n_samples)]
    draws = rng.choice(ks, size=n_samples, p=masses / mass_per_site)
    values = np.zeros(n_samples)
    for i in range(n_samples):
        path = roots[i] + h * _lattice_loop(rng, int(draws[i]))[None, :]
        if not _stays_in(path, domain)[0]:
            continue
        if _hits(path, first, 0.0)[0] and _hits(path, second, 0.0)[0]:
            values[i] = weight
    window = {"h": h, "k_min": k_min, "k_max": k_max, "sites": int(sites.size), "seed": seed}
    return Estimate.from_values(values, window)
