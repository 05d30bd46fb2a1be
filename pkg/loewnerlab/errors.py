"""Custom exception types and validation helpers for loewnerlab."""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

logger = logging.getLogger("loewnerlab.errors")


class ErrorCode(Enum):
    """Error codes for classification and categorization."""

    # Loewner flow errors
    SWALLOWED = "swallowed"
    FORCE_POINT_SWALLOWED = "force_point_swallowed"

    # Geometry errors
    CHART_MISMATCH = "chart_mismatch"
    SINGULAR_POINT = "singular_point"
    COINCIDENT_POINTS = "coincident_points"
    SELF_INTERSECTION = "self_intersection"
    INTERSECTING_CURVES = "intersecting_curves"

    # Monte Carlo errors
    DEGENERATE_WINDOW = "degenerate_window"

    # Verification errors
    HYPOTHESIS_VIOLATION = "hypothesis_violation"

    # Optimization errors
    NON_FINITE_OBJECTIVE = "non_finite_objective"
    NUMERICAL_FAILURE = "numerical_failure"

    # Input and configuration errors
    MALFORMED_INPUT = "malformed_input"
    CONFIG_INVALID = "config_invalid"

    # General errors
    INVALID_PARAMETER = "invalid_parameter"
    UNKNOWN_ERROR = "unknown_error"


@dataclass
class LabError(Exception):
    """Base exception for loewnerlab with structured error information."""

    code: ErrorCode
    message: str
    details: dict[str, Any] = field(default_factory=dict)
    cause: Exception | None = None

    def __str__(self) -> str:
        parts = [f"[{self.code.value}] {self.message}"]
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            parts.append(f" ({details_str})")
        if self.cause:
            parts.append(f" caused by: {self.cause}")
        return "".join(parts)

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary for logging/serialization."""
        return {
            "code": self.code.value,
            "message": self.message,
            "details": {k: _plain(v) for k, v in self.details.items()},
            "cause": str(self.cause) if self.cause else None,
        }


def _plain(value: Any) -> Any:
    """Make a detail value JSON friendly."""
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, "item") and callable(value.item):
        try:
            return _plain(value.item())
        except (TypeError, ValueError):
            return str(value)
    return value


class GeometryError(LabError):
    """Chart, singularity and polyline errors."""

    pass


class SwallowedError(LabError):
    """A point (or force point) was swallowed by the hull before the horizon."""

    @property
    def time(self) -> float:
        """Capacity time at which the point was swallowed."""
        return float(self.details.get("time", math.nan))


class SamplingError(LabError):
    """Monte Carlo and SLE sampling errors."""

    pass


class HypothesisError(LabError):
    """A deformation case violates the hypotheses of its identity."""

    pass


class InputError(LabError):
    """Malformed input files or arguments."""

    pass


class ConfigError(LabError):
    """Configuration errors."""

    pass


class OptimizationError(LabError):
    """Failures inside the potential minimizer."""

    pass


def _invalid(name: str, value: Any, reason: str) -> LabError:
    return LabError(
        code=ErrorCode.INVALID_PARAMETER,
        message=f"{name} {reason}",
        details={name: value},
    )


def validate_kappa(kappa: float, allow_zero: bool = False) -> float:
    """
    Validate an SLE parameter.

    Args:
        kappa: The value to validate
        allow_zero: Accept kappa = 0 (deterministic, zero-noise driving)

    Returns:
        kappa as a float

    Raises:
        LabError: If kappa is not finite or outside (0, 4] ([0, 4] with allow_zero).
    """
    kappa = float(kappa)
    if not math.isfinite(kappa):
        raise _invalid("kappa", kappa, "must be finite")
    lower_ok = kappa >= 0.0 if allow_zero else kappa > 0.0
    if not lower_ok or kappa > 4.0:
        raise _invalid("kappa", kappa, "must lie in (0, 4]" if not allow_zero else "must lie in [0, 4]")
    return kappa


def validate_rho(rho: float | None) -> float:
    """Validate a force-point weight; None means no force point (rho = 0)."""
    if rho is None:
        return 0.0
    rho = float(rho)
    if not math.isfinite(rho) or rho <= -2.0:
        raise _invalid("rho", rho, "must be finite and > -2")
    return rho


def require_positive(value: float, name: str) -> float:
    """Reject non-positive or non-finite values."""
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise _invalid(name, value, "must be positive")
    return value


def finite_or_inf(value: float, context: str = "") -> float:
    """
    Map NaN to +inf so that an undefined energy reads as infinite.

    Logs a warning when the replacement happens.
    """
    if math.isnan(value):
        logger.warning(
            "Non-finite value%s, reporting +inf",
            f" in {context}" if context else "",
            extra={"context": context},
        )
        return math.inf
    return value
