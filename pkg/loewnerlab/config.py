"""Configuration management for loewnerlab."""

from __future__ import annotations

import json
import logging
import os
import stat
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, ErrorCode

logger = logging.getLogger("loewnerlab.config")

THREADS_ENV = "LOEWNER_LAB_THREADS"
SEED_ENV = "LOEWNER_LAB_SEED"

SWALLOW_POLICIES = ("reflect", "reject")


def get_config_dir() -> Path:
    """Get the loewnerlab config directory (owner-only permissions)."""
    config_dir = Path.home() / ".loewnerlab"
    config_dir.mkdir(parents=True, exist_ok=True)
    try:
        config_dir.chmod(stat.S_IRWXU)  # 0700
    except OSError:
        pass
    return config_dir


def get_config_path() -> Path:
    """Get the path to config.json."""
    return get_config_dir() / "config.json"


def _config_error(message: str, **details: Any) -> ConfigError:
    return ConfigError(code=ErrorCode.CONFIG_INVALID, message=message, details=details)


@dataclass
class ToleranceConfig:
    """Numerical tolerances shared by every module."""

    geometric: float = 1e-6  # membership, clearance and angle checks
    algebraic: float = 1e-10  # chain-rule and cocycle identities
    deterministic: float = 1e-3  # quadrature/zipper budget in identity checks
    swallow: float = 1e-9  # |g - W| below this means swallowed
    force_point: float = 1e-6  # |W - V| below this triggers step subdivision
    refine_factor: float = 10.0  # RK4 halves while |g - W| < refine_factor * sqrt(dt)
    marked_radius: float = 0.05  # exempt disks around shared marked points

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not value > 0:
                raise _config_error(f"tolerance {name} must be positive", **{name: value})


@dataclass
class LoopSoupConfig:
    """Brownian loop-soup Monte Carlo budget."""

    n_samples: int = 100_000
    bridge_points: int = 256
    t_min_divisor: float = 8.0  # t_min = (dist / t_min_divisor)^2
    box_margin: float = 0.5  # spatial box = hull of the sets grown by margin * diameter
    t_max_factor: float = 1.0  # t_max = t_max_factor * (box side)^2
    batch_size: int = 4096
    clearance: float = 0.0  # extra hit radius around target sets

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise _config_error("n_samples must be >= 1", n_samples=self.n_samples)
        if self.bridge_points < 4:
            raise _config_error("bridge_points must be >= 4", bridge_points=self.bridge_points)
        if self.t_min_divisor <= 0 or self.t_max_factor <= 0 or self.box_margin < 0:
            raise _config_error("loop window parameters must be positive")
        if self.batch_size < 1:
            raise _config_error("batch_size must be >= 1", batch_size=self.batch_size)


@dataclass
class SamplerDefaults:
    """Defaults for SLE path sampling."""

    steps: int = 400
    horizon: float = 1.0
    swallow_policy: str = "reflect"  # "reflect" or "reject"
    reflect_epsilon: float = 1e-6
    subdivision: int = 16
    max_rejections: int = 100

    def __post_init__(self) -> None:
        self.swallow_policy = self.swallow_policy.strip().lower()
        if self.swallow_policy not in SWALLOW_POLICIES:
            raise _config_error(
                f"Unsupported swallow policy: {self.swallow_policy}",
                swallow_policy=self.swallow_policy,
            )
        if self.steps < 2 or self.horizon <= 0 or self.subdivision < 2:
            raise _config_error("sampler grid parameters out of range")


@dataclass
class OptimizerConfig:
    """Gradient descent settings."""

    max_iter: int = 500
    fd_step: float = 1e-5
    grad_tol: float = 1e-7
    step_tol: float = 1e-12
    armijo: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    refresh_every: int = 10  # loop-term refresh interval in frozen-estimate mode

    def __post_init__(self) -> None:
        if not 0 < self.shrink < 1:
            raise _config_error("shrink must lie in (0, 1)", shrink=self.shrink)
        if not 0 < self.armijo < 1:
            raise _config_error("armijo must lie in (0, 1)", armijo=self.armijo)
        if self.fd_step <= 0:
            raise _config_error("fd_step must be positive", fd_step=self.fd_step)


@dataclass
class LabConfig:
    """Main configuration for loewnerlab."""

    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    loops: LoopSoupConfig = field(default_factory=LoopSoupConfig)
    sampler: SamplerDefaults = field(default_factory=SamplerDefaults)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    threads: int = field(default_factory=lambda: min(8, os.cpu_count() or 1))
    seed: int = 20240601

    def save(self) -> None:
        """Save configuration to disk."""
        with open(get_config_path(), "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def to_dict(self) -> dict[str, Any]:
        """Convert config to dictionary for JSON serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LabConfig:
        """Build a config from a (possibly partial) dictionary."""
        config = cls()
        try:
            if "tolerances" in data:
                config.tolerances = ToleranceConfig(**data["tolerances"])
            if "loops" in data:
                config.loops = LoopSoupConfig(**data["loops"])
            if "sampler" in data:
                config.sampler = SamplerDefaults(**data["sampler"])
            if "optimizer" in data:
                config.optimizer = OptimizerConfig(**data["optimizer"])
        except TypeError as e:
            raise _config_error(f"Unknown configuration key: {e}") from e
        config.threads = int(data.get("threads", config.threads))
        config.seed = int(data.get("seed", config.seed))
        return config

    @classmethod
    def load(cls) -> LabConfig:
        """Load configuration from disk, then apply environment overrides."""
        config_path = get_config_path()
        if config_path.exists():
            with open(config_path) as f:
                config = cls.from_dict(json.load(f))
        else:
            config = cls()

        env_threads = os.environ.get(THREADS_ENV)
        if env_threads:
            try:
                config.threads = max(1, int(env_threads))
            except ValueError:
                logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, env_threads)

        env_seed = os.environ.get(SEED_ENV)
        if env_seed:
            try:
                config.seed = int(env_seed)
            except ValueError:
                logger.warning("Ignoring non-integer %s=%r", SEED_ENV, env_seed)

        return config


def worker_count(requested: int | None = None) -> int:
    """Thread-pool size: the request, capped by LOEWNER_LAB_THREADS when set."""
    cap = os.environ.get(THREADS_ENV)
    count = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            count = min(count, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, count)


@dataclass
class RunConfig:
    """Everything needed to reproduce one CLI run; embedded in every artifact."""

    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    out_dir: str = "."
    seed: int = 20240601
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    mc_samples: int = 100_000
    steps: int = 400
    kappa: float | None = None
    rho: float | None = None
    n: int | None = None
    mu: float | None = None
    eps_grid: list[float] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-ready dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        """Rebuild a RunConfig emitted by a previous run."""
        data = dict(data)
        tolerances = ToleranceConfig(**data.pop("tolerances", {}))
        try:
            return cls(tolerances=tolerances, **data)
        except TypeError as e:
            raise _config_error(f"Malformed run config: {e}") from e

    @property
    def run_id(self) -> str:
        """Short identifier derived from command and seed."""
        return f"{self.command}-{self.seed:x}"[:24]
