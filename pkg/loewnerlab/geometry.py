"""Conformal geometry: primitive maps, map chains, charts, geodesics and regions.

Every primitive map evaluates its image and its first three derivatives in
closed form. Chains compose primitives with the chain rule and accumulate
the Schwarzian through the cocycle S(f∘g) = (Sf∘g)·g'² + Sg.

Points are numpy complex arrays (scalars are accepted everywhere). The point
at infinity of the half-plane is handled through the chart z ↦ −1/z.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ErrorCode, GeometryError
from .models import INFINITY, Chart, CurvePath, is_infinite

logger = logging.getLogger("loewnerlab.geometry")

Derivatives = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

_NEWTON_ITERATIONS = 60
_CHUNK = 2048


def _as_complex(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def upper_arg(z: np.ndarray) -> np.ndarray:
    """Argument in [0, π], taking the limit from ℍ for points on the real line."""
    ang = np.angle(z)
    return np.clip(np.where(ang < -np.pi / 2, ang + 2 * np.pi, ang), 0.0, np.pi)


def upper_sqrt(z: np.ndarray) -> np.ndarray:
    """Square root with non-negative imaginary part."""
    r = np.sqrt(_as_complex(z))
    return np.where(r.imag < 0, -r, r)


# ---------------------------------------------------------------------------
# Primitive maps
# ---------------------------------------------------------------------------


class ConformalMap(ABC):
    """
    Abstract analytic map with closed-form derivatives.

    Subclasses implement:
        - evaluate(z): the image
        - derivatives(z): (f, f', f'', f''')
        - inverse(): the inverse map
        - singular(z): mask of points where the map is not analytic
    """

    @abstractmethod
    def evaluate(self, z: np.ndarray) -> np.ndarray:
        """Image of z."""

    @abstractmethod
    def derivatives(self, z: np.ndarray) -> Derivatives:
        """(f, f', f'', f''') at z."""

    @abstractmethod
    def inverse(self) -> ConformalMap:
        """The inverse map."""

    def singular(self, z: np.ndarray) -> np.ndarray:
        """Mask of points at which derivatives are undefined."""
        return np.zeros(np.shape(z), dtype=bool)

    def __call__(self, z):
        return self.evaluate(_as_complex(z))

    def derivative(self, z) -> np.ndarray:
        return self.derivatives(_as_complex(z))[1]

    def schwarzian(self, z) -> np.ndarray:
        _, d1, d2, d3 = self.derivatives(_as_complex(z))
        return d3 / d1 - 1.5 * (d2 / d1) ** 2


@dataclass(frozen=True)
class Mobius(ConformalMap):
    """z ↦ (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self) -> None:
        if abs(self.a * self.d - self.b * self.c) == 0:
            raise GeometryError(
                code=ErrorCode.INVALID_PARAMETER,
                message="Möbius coefficients must have non-zero determinant",
            )

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivatives(self, z: np.ndarray) -> Derivatives:
        q = self.c * z + self.d
        f = (self.a * z + self.b) / q
        d1 = self.det / q**2
        d2 = -2 * self.c * self.det / q**3
        d3 = 6 * self.c**2 * self.det / q**4
        return f, d1, d2, d3

    def singular(self, z: np.ndarray) -> np.ndarray:
        return np.abs(self.c * z + self.d) == 0

    def inverse(self) -> Mobius:
        return Mobius(self.d, -self.b, -self.c, self.a)

    def then(self, outer: Mobius) -> Mobius:
        """outer ∘ self as a single Möbius map."""
        return Mobius(
            outer.a * self.a + outer.b * self.c,
            outer.a * self.b + outer.b * self.d,
            outer.c * self.a + outer.d * self.c,
            outer.c * self.b + outer.d * self.d,
        )

    def at_infinity(self) -> complex:
        """Image of ∞."""
        return INFINITY if self.c == 0 else self.a / self.c

    def image(self, z: complex) -> complex:
        """Image of a single point, ∞ allowed on both sides."""
        if is_infinite(z):
            return self.at_infinity()
        q = self.c * z + self.d
        if q == 0:
            return INFINITY
        return complex((self.a * z + self.b) / q)

    def abs_derivative(self, z: complex) -> float:
        """|m'(z)| in the chart at infinity wherever z or m(z) is ∞."""
        det = abs(self.det)
        if is_infinite(z):
            if self.c == 0:
                return abs(self.d / self.a)
            # chart w = -1/z at the source, image finite
            return det / abs(self.c) ** 2
        q = self.c * z + self.d
        if q == 0:
            # image is ∞: derivative of -1/m at z
            return abs(self.c) ** 2 / det
        return det / abs(q) ** 2


def rotation(angle: float) -> Mobius:
    return Mobius(complex(np.exp(1j * angle)), 0j, 0j, 1 + 0j)


def scaling(factor: float, shift: float = 0.0) -> Mobius:
    """z ↦ factor·z + shift (an automorphism of ℍ fixing ∞ for factor > 0)."""
    return Mobius(complex(factor), complex(shift), 0j, 1 + 0j)


def disk_automorphism(a: complex, angle: float = 0.0) -> Mobius:
    """z ↦ e^{iθ}(z − a)/(1 − ā z)."""
    if abs(a) >= 1:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="disk automorphism needs |a| < 1",
            details={"a": a},
        )
    rot = complex(np.exp(1j * angle))
    return Mobius(rot, -rot * a, -np.conj(a), 1 + 0j)


CAYLEY_H_TO_D = Mobius(1 + 0j, -1j, 1 + 0j, 1j)
CAYLEY_D_TO_H = CAYLEY_H_TO_D.inverse()


def cayley(point, direction: str = "H->D"):
    """
    Chart change between (ℍ; 0, ∞) and (𝔻; −1, 1).

    ℍ→𝔻 is z ↦ (z − i)/(z + i); 𝔻→ℍ is its inverse. ∞ is admitted on the
    half-plane side (ℍ→𝔻 sends it to 1, 𝔻→ℍ sends 1 to it).

    Raises:
        GeometryError: at the pole z = −i of the ℍ→𝔻 map.
    """
    if direction not in {"H->D", "D->H"}:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="direction must be 'H->D' or 'D->H'",
            details={"direction": direction},
        )
    m = CAYLEY_H_TO_D if direction == "H->D" else CAYLEY_D_TO_H
    if np.isscalar(point):
        z = complex(point)
        if direction == "H->D" and abs(z + 1j) == 0:
            raise GeometryError(
                code=ErrorCode.SINGULAR_POINT,
                message="z = -i is the pole of the Cayley map",
            )
        return m.image(z)
    z = _as_complex(point)
    if direction == "H->D" and np.any(np.abs(z + 1j) == 0):
        raise GeometryError(code=ErrorCode.SINGULAR_POINT, message="z = -i is the pole of the Cayley map")
    with np.errstate(divide="ignore", invalid="ignore"):
        return m.evaluate(z)


def mobius_from_points(source: Sequence[complex], target: Sequence[complex]) -> Mobius:
    """The Möbius map sending three distinct points to three distinct points (∞ allowed)."""

    def to_standard(z1: complex, z2: complex, z3: complex) -> Mobius:
        # z1 -> 0, z2 -> 1, z3 -> ∞
        if is_infinite(z1):
            return Mobius(0j, z2 - z3, 1 + 0j, -z3)
        if is_infinite(z2):
            return Mobius(1 + 0j, -z1, 1 + 0j, -z3)
        if is_infinite(z3):
            return Mobius(1 + 0j, -z1, 0j, z2 - z1)
        return Mobius(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))

    src = [complex(z) for z in source]
    dst = [complex(z) for z in target]
    for group in (src, dst):
        finite = [z for z in group if not is_infinite(z)]
        if len({(round(z.real, 14), round(z.imag, 14)) for z in finite}) < len(finite) or (
            len(finite) < 2
        ):
            raise GeometryError(
                code=ErrorCode.COINCIDENT_POINTS,
                message="three distinct points are required",
            )
    return to_standard(*src).then(to_standard(*dst).inverse())


def chord_chart(x: complex, y: complex) -> Mobius:
    """Automorphism of ℍ sending (x, y) to (0, ∞)."""
    x = complex(x)
    if is_infinite(y):
        return Mobius(1 + 0j, -x, 0j, 1 + 0j)
    y = complex(y)
    if abs(x - y) == 0:
        raise GeometryError(code=ErrorCode.COINCIDENT_POINTS, message="chord endpoints coincide")
    if y.real > x.real:
        return Mobius(1 + 0j, -x, -1 + 0j, y)
    return Mobius(1 + 0j, -x, 1 + 0j, -y)


@dataclass(frozen=True)
class PowerMap(ConformalMap):
    """z ↦ offset + (z − center)^p with the branch cut along the ray at angle `cut`."""

    p: float
    center: complex = 0j
    offset: complex = 0j
    cut: float = math.pi

    def _log(self, z: np.ndarray) -> np.ndarray:
        u = z - self.center
        arg = np.angle(u * np.exp(-1j * (self.cut - np.pi))) + (self.cut - np.pi)
        return np.log(np.abs(u)) + 1j * arg

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return self.offset + np.exp(self.p * self._log(z))

    def derivatives(self, z: np.ndarray) -> Derivatives:
        u = z - self.center
        g = np.exp(self.p * self._log(z))
        p = self.p
        return self.offset + g, p * g / u, p * (p - 1) * g / u**2, p * (p - 1) * (p - 2) * g / u**3

    def singular(self, z: np.ndarray) -> np.ndarray:
        return np.abs(z - self.center) == 0

    def inverse(self) -> PowerMap:
        return PowerMap(1.0 / self.p, self.offset, self.center, self.p * self.cut)


@dataclass(frozen=True)
class ExpMap(ConformalMap):
    """z ↦ exp(scale·z); with scale = i this is the covering chart ℍ → 𝔻∖{0}."""

    scale: complex = 1j

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self.scale * z)

    def derivatives(self, z: np.ndarray) -> Derivatives:
        f = np.exp(self.scale * z)
        s = self.scale
        return f, s * f, s**2 * f, s**3 * f

    def inverse(self) -> LogMap:
        return LogMap(self.scale)


@dataclass(frozen=True)
class LogMap(ConformalMap):
    """w ↦ log(w)/scale on the branch whose argument lies within π of `branch`."""

    scale: complex = 1j
    branch: float = 0.0

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        arg = np.angle(w * np.exp(-1j * self.branch)) + self.branch
        return (np.log(np.abs(w)) + 1j * arg) / self.scale

    def derivatives(self, w: np.ndarray) -> Derivatives:
        s = self.scale
        return self.evaluate(w), 1 / (s * w), -1 / (s * w**2), 2 / (s * w**3)

    def singular(self, w: np.ndarray) -> np.ndarray:
        return np.abs(w) == 0

    def inverse(self) -> ExpMap:
        return ExpMap(self.scale)


@dataclass(frozen=True)
class Polynomial(ConformalMap):
    """z ↦ Σ c_k z^k (coefficients in increasing degree); inverse by Newton's method."""

    coefficients: tuple[complex, ...]

    def _eval(self, coefs: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(z, coefs)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return self._eval(np.asarray(self.coefficients, complex), z)

    def derivatives(self, z: np.ndarray) -> Derivatives:
        coefs = np.asarray(self.coefficients, complex)
        out = [self._eval(coefs, z)]
        for _ in range(3):
            coefs = np.polynomial.polynomial.polyder(coefs) if coefs.size > 1 else np.zeros(1, complex)
            out.append(self._eval(coefs, z) * np.ones_like(z))
        return out[0], out[1], out[2], out[3]

    def inverse(self) -> PolynomialInverse:
        return PolynomialInverse(self)

    @classmethod
    def perturbation(cls, epsilon: float, q: Sequence[complex]) -> Polynomial:
        """z + ε·q(z)."""
        coefs = [epsilon * complex(c) for c in q] + [0j] * max(0, 2 - len(q))
        coefs[1] += 1.0
        return cls(tuple(coefs))


@dataclass(frozen=True)
class PolynomialInverse(ConformalMap):
    """Local inverse of a polynomial near the identity branch."""

    forward: Polynomial

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        w = _as_complex(w)
        z = w.copy()
        for _ in range(_NEWTON_ITERATIONS):
            f, d1, _, _ = self.forward.derivatives(z)
            step = (f - w) / d1
            z = z - step
            if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(z))):
                break
        return z

    def derivatives(self, w: np.ndarray) -> Derivatives:
        z = self.evaluate(w)
        _, h1, h2, h3 = self.forward.derivatives(z)
        g1 = 1 / h1
        return z, g1, -h2 * g1**3, -h3 * g1**4 + 3 * h2**2 * g1**5

    def inverse(self) -> Polynomial:
        return self.forward


# ---------------------------------------------------------------------------
# Elementary slit maps
# ---------------------------------------------------------------------------


def tilted_slit_parameters(delta: float, tau: float) -> tuple[float, float, float]:
    """
    (α, a, b) of the tilted slit of capacity τ whose removal moves the driving value by δ.

    h(z) = (z − a)^α (z − b)^{1−α} maps ℍ onto ℍ minus a straight slit at
    angle π(1 − α) from 0, with h(z) = z − 2τ/z + O(z^{-2}) and critical point δ.
    """
    s = delta / (2.0 * math.sqrt(tau))
    alpha = 0.5 * (1.0 + s / math.sqrt(4.0 + s * s))
    alpha = min(max(alpha, 1e-12), 1 - 1e-12)
    a = -2.0 * math.sqrt(tau * (1.0 - alpha) / alpha)
    b = 2.0 * math.sqrt(tau * alpha / (1.0 - alpha))
    return alpha, a, b


def tip_modulus_factor(alpha: float) -> float:
    """|slit tip| / sqrt(τ) for the tilted slit with exponent α."""
    return 2.0 * alpha ** (alpha - 0.5) * (1.0 - alpha) ** (0.5 - alpha)


def alpha_from_angle(theta: float) -> float:
    """Exponent α of the slit pointing in direction θ ∈ (0, π)."""
    return 1.0 - theta / math.pi


def slit_unzip(z: np.ndarray, alpha: float, a: float, b: float, tau: float) -> np.ndarray:
    """h^{-1}(z): damped Newton on α Log(ζ−a) + (1−α) Log(ζ−b) = Log z."""
    z = _as_complex(z)
    log_w = np.log(np.abs(z)) + 1j * upper_arg(z)
    zeta = upper_sqrt(z * z + 4.0 * tau)
    # real points left of the slit start on the negative axis
    zeta = np.where((zeta.imag == 0) & (z.real < 0), -zeta, zeta)
    for _ in range(_NEWTON_ITERATIONS):
        la = zeta - a
        lb = zeta - b
        value = alpha * (np.log(np.abs(la)) + 1j * upper_arg(la)) + (1 - alpha) * (
            np.log(np.abs(lb)) + 1j * upper_arg(lb)
        ) - log_w
        slope = alpha / la + (1 - alpha) / lb
        step = value / slope
        candidate = zeta - step
        # damp steps that would leave the closed upper half-plane
        for _ in range(40):
            bad = candidate.imag < 0
            if not np.any(bad):
                break
            step = np.where(bad, step / 2, step)
            candidate = zeta - step
        zeta = np.where(candidate.imag < 0, candidate.real + 0j, candidate)
        if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(zeta))):
            break
    return zeta


def slit_zip_derivatives(z: np.ndarray, alpha: float, a: float, b: float) -> Derivatives:
    """h and its first three derivatives."""
    z = _as_complex(z)
    la, lb = z - a, z - b
    h = np.exp(
        alpha * (np.log(np.abs(la)) + 1j * upper_arg(la))
        + (1 - alpha) * (np.log(np.abs(lb)) + 1j * upper_arg(lb))
    )
    L = alpha / la + (1 - alpha) / lb
    L1 = -alpha / la**2 - (1 - alpha) / lb**2
    L2 = 2 * alpha / la**3 + 2 * (1 - alpha) / lb**3
    return h, h * L, h * (L**2 + L1), h * (L**3 + 3 * L * L1 + L2)


def slit_zip(z: np.ndarray, alpha: float, a: float, b: float) -> np.ndarray:
    z = _as_complex(z)
    la, lb = z - a, z - b
    return np.exp(
        alpha * (np.log(np.abs(la)) + 1j * upper_arg(la))
        + (1 - alpha) * (np.log(np.abs(lb)) + 1j * upper_arg(lb))
    )


@dataclass(frozen=True)
class TiltedSlit(ConformalMap):
    """One chordal zipper step: z ↦ W + h^{-1}(z − W), removing a straight slit at W."""

    base: float
    tau: float
    alpha: float
    a: float
    b: float

    @classmethod
    def from_step(cls, w0: float, w1: float, tau: float) -> TiltedSlit:
        alpha, a, b = tilted_slit_parameters(w1 - w0, tau)
        return cls(w0, tau, alpha, a, b)

    @classmethod
    def from_tip(cls, base: float, tip: complex) -> TiltedSlit:
        rel = complex(tip) - base
        theta = float(np.angle(rel))
        alpha = alpha_from_angle(theta)
        tau = (abs(rel) / tip_modulus_factor(alpha)) ** 2
        _, a, b = _ab(alpha, tau)
        return cls(base, tau, alpha, a, b)

    @property
    def tip(self) -> complex:
        """Tip of the removed slit."""
        return complex(self.base + slit_zip(self.image_of_tip, self.alpha, self.a, self.b))

    @property
    def image_of_tip(self) -> float:
        return self.alpha * self.b + (1 - self.alpha) * self.a

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return self.base + slit_unzip(z - self.base, self.alpha, self.a, self.b, self.tau)

    def derivatives(self, z: np.ndarray) -> Derivatives:
        zeta = slit_unzip(z - self.base, self.alpha, self.a, self.b, self.tau)
        _, h1, h2, h3 = slit_zip_derivatives(zeta, self.alpha, self.a, self.b)
        g1 = 1 / h1
        return self.base + zeta, g1, -h2 * g1**3, -h3 * g1**4 + 3 * h2**2 * g1**5

    def singular(self, z: np.ndarray) -> np.ndarray:
        zeta = slit_unzip(z - self.base, self.alpha, self.a, self.b, self.tau)
        return (np.abs(zeta - self.a) < 1e-14) | (np.abs(zeta - self.b) < 1e-14) | (
            np.abs(zeta - self.image_of_tip) < 1e-14
        )

    def inverse(self) -> TiltedSlitInverse:
        return TiltedSlitInverse(self)


def _ab(alpha: float, tau: float) -> tuple[float, float, float]:
    a = -2.0 * math.sqrt(tau * (1.0 - alpha) / alpha)
    b = 2.0 * math.sqrt(tau * alpha / (1.0 - alpha))
    return alpha, a, b


@dataclass(frozen=True)
class TiltedSlitInverse(ConformalMap):
    """z ↦ W + h(z − W): grows the slit back."""

    step: TiltedSlit

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        s = self.step
        return s.base + slit_zip(z - s.base, s.alpha, s.a, s.b)

    def derivatives(self, z: np.ndarray) -> Derivatives:
        s = self.step
        h, h1, h2, h3 = slit_zip_derivatives(z - s.base, s.alpha, s.a, s.b)
        return s.base + h, h1, h2, h3

    def singular(self, z: np.ndarray) -> np.ndarray:
        s = self.step
        return (np.abs(z - s.base - s.a) < 1e-14) | (np.abs(z - s.base - s.b) < 1e-14)

    def inverse(self) -> TiltedSlit:
        return self.step


@dataclass(frozen=True)
class VerticalSlit(ConformalMap):
    """z ↦ W + sqrt((z − W)² + 4τ): removes the vertical slit [W, W + 2i√τ]."""

    base: float
    tau: float
    inverse_direction: bool = False

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        sign = -1.0 if self.inverse_direction else 1.0
        return self.base + upper_sqrt((z - self.base) ** 2 + sign * 4.0 * self.tau)

    def derivatives(self, z: np.ndarray) -> Derivatives:
        sign = -1.0 if self.inverse_direction else 1.0
        u = z - self.base
        r = upper_sqrt(u**2 + sign * 4.0 * self.tau)
        c = sign * 4.0 * self.tau
        return self.base + r, u / r, c / r**3, -3 * c * u / r**5

    def singular(self, z: np.ndarray) -> np.ndarray:
        sign = -1.0 if self.inverse_direction else 1.0
        return np.abs((z - self.base) ** 2 + sign * 4.0 * self.tau) < 1e-28

    def inverse(self) -> VerticalSlit:
        return VerticalSlit(self.base, self.tau, not self.inverse_direction)

    @property
    def tip(self) -> complex:
        return complex(self.base, 2.0 * math.sqrt(self.tau))


def _koebe(z: np.ndarray) -> Derivatives:
    """k(z) = z/(1+z)² and its derivatives."""
    q = 1 + z
    return z / q**2, (1 - z) / q**3, (2 * z - 4) / q**4, (18 - 6 * z) / q**5


def _koebe_inverse(w: np.ndarray, hint: np.ndarray | None = None) -> np.ndarray:
    """Root of z/(1+z)² = w inside the closed unit disk.

    On the circle both roots are conjugate; the one on the side of hint wins.
    """
    s = np.sqrt(1 - 4 * w)
    d1 = (1 - 2 * w) + s
    d2 = (1 - 2 * w) - s
    r1, r2 = 2 * w / d1, 2 * w / d2
    a1, a2 = np.abs(d1), np.abs(d2)
    tie = np.abs(a1 - a2) <= 1e-12 * np.maximum(a1, a2)
    side = np.ones_like(np.real(w)) if hint is None else np.where(np.imag(hint) < 0, -1.0, 1.0)
    pick_tie = np.where(np.imag(r1) * side >= 0, r1, r2)
    return np.where(tie, pick_tie, np.where(a1 >= a2, r1, r2))


def _radial_unit(zr: np.ndarray, scale: float) -> Derivatives:
    """k^{-1}(λ k(z)) and its derivatives for the slit on the positive axis.

    Near z = −1 the Koebe form passes through ∞, so there the map is solved
    as p^{-1/2} − p^{1/2} = (ζ^{-1/2} − ζ^{1/2})/√λ with ζ = −z, p = −g.
    This branch switch replaces a covering-map/disk chart switch at |g| = 1/2.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k0, k1, k2, k3 = _koebe(zr)
        u0, u1, u2, u3 = scale * k0, scale * k1, scale * k2, scale * k3
        q = _koebe_inverse(u0, zr)
        _, c1, c2, c3 = _koebe(q)
        q1 = 1 / c1
        q2 = -c2 * q1**3
        q3 = -c3 * q1**4 + 3 * c2**2 * q1**5
        g1 = q1 * u1
        g2 = q2 * u1**2 + q1 * u2
        g3 = q3 * u1**3 + 3 * q2 * u1 * u2 + q1 * u3

        root = np.sqrt(-zr)
        sl = math.sqrt(scale)
        v = (1 / root - root) / sl
        v1 = (-0.5 / root**3 - 0.5 / root) / sl
        v2 = (0.75 / root**5 + 0.25 / root**3) / sl
        v3 = (-1.875 / root**7 - 0.375 / root**5) / sl
        r = np.sqrt(v * v + 4)
        s = (r - v) / 2
        s1 = (v / r - 1) / 2
        s2 = 2 / r**3
        s3 = -6 * v / r**5
        p1, p2, p3 = 2 * s * s1, 2 * s1**2 + 2 * s * s2, 6 * s1 * s2 + 2 * s * s3
        a1 = p1 * v1
        a2 = p2 * v1**2 + p1 * v2
        a3 = p3 * v1**3 + 3 * p2 * v1 * v2 + p1 * v3

    near = np.abs(zr + 1) < 0.5
    return (
        np.where(near, -(s**2), q),
        np.where(near, a1, g1),
        np.where(near, -a2, g2),
        np.where(near, a3, g3),
    )


def radial_slit_radius(tau: float) -> float:
    """Inner end x of the radial slit [x, 1] of capacity τ (g'(0) = e^τ)."""
    e = math.exp(tau)
    return 2 * e - 1 - 2 * math.sqrt(e * (e - 1))


def radial_slit_capacity(x: float) -> float:
    """Capacity log((1+x)²/(4x)) of the radial slit [x, 1]."""
    return math.log((1 + x) ** 2 / (4 * x))


@dataclass(frozen=True)
class RadialSlit(ConformalMap):
    """z ↦ e^{iu} k^{-1}(λ k(e^{-iu} z)) with k(z) = z/(1+z)².

    λ = e^τ > 1 removes the slit [x e^{iu}, e^{iu}] of capacity τ (tip ↦ e^{iu});
    λ = e^{-τ} grows it back.
    """

    angle: float
    scale: float

    @classmethod
    def removing(cls, angle: float, tau: float) -> RadialSlit:
        return cls(angle, math.exp(tau))

    @property
    def tau(self) -> float:
        return math.log(self.scale)

    @property
    def tip(self) -> complex:
        x = radial_slit_radius(abs(self.tau))
        return complex(x * np.exp(1j * self.angle))

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return self.derivatives(z)[0]

    def derivatives(self, z: np.ndarray) -> Derivatives:
        rot = np.exp(1j * self.angle)
        q, g1, g2, g3 = _radial_unit(_as_complex(z) / rot, self.scale)
        # conjugation by the rotation: g(z) = e^{iu} G(e^{-iu} z)
        return rot * q, g1, g2 / rot, g3 / rot**2

    def singular(self, z: np.ndarray) -> np.ndarray:
        return np.abs(z / np.exp(1j * self.angle) - 1) < 1e-14

    def inverse(self) -> RadialSlit:
        return RadialSlit(self.angle, 1.0 / self.scale)


# ---------------------------------------------------------------------------
# Chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MapChain(ConformalMap):
    """Composition of primitive maps; steps[0] is applied first."""

    steps: tuple[ConformalMap, ...] = ()

    @classmethod
    def of(cls, *maps: ConformalMap | MapChain) -> MapChain:
        flat: list[ConformalMap] = []
        for m in maps:
            if isinstance(m, MapChain):
                flat.extend(m.steps)
            else:
                flat.append(m)
        return cls(tuple(flat))

    def compose(self, outer: ConformalMap | MapChain) -> MapChain:
        """outer ∘ self."""
        return MapChain.of(self, outer)

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        for step in self.steps:
            z = step.evaluate(z)
        return z

    def derivatives(self, z: np.ndarray) -> Derivatives:
        z = _as_complex(z)
        f = z.copy()
        g1 = np.ones_like(z)
        g2 = np.zeros_like(z)
        g3 = np.zeros_like(z)
        for step in self.steps:
            f, s1, s2, s3 = step.derivatives(f)
            g1, g2, g3 = (
                s1 * g1,
                s2 * g1**2 + s1 * g2,
                s3 * g1**3 + 3 * s2 * g1 * g2 + s1 * g3,
            )
        return f, g1, g2, g3

    def schwarzian(self, z) -> np.ndarray:
        """Schwarzian of the chain accumulated by the cocycle rule."""
        z = _as_complex(z)
        self.check_regular(z)
        f = z.copy()
        g1 = np.ones_like(z)
        s = np.zeros_like(z)
        for step in self.steps:
            s_step = step.schwarzian(f)
            d1 = step.derivative(f)
            s = s_step * g1**2 + s
            g1 = d1 * g1
            f = step.evaluate(f)
        return s

    def check_regular(self, z: np.ndarray) -> None:
        """Raise if z hits a singular point of any step."""
        f = _as_complex(z)
        for index, step in enumerate(self.steps):
            if np.any(step.singular(f)):
                raise GeometryError(
                    code=ErrorCode.SINGULAR_POINT,
                    message="evaluation at a singular point of the chain",
                    details={"step": index, "map": type(step).__name__},
                )
            f = step.evaluate(f)

    def inverse(self) -> MapChain:
        return MapChain(tuple(step.inverse() for step in reversed(self.steps)))

    def singular(self, z: np.ndarray) -> np.ndarray:
        mask = np.zeros(np.shape(z), dtype=bool)
        f = _as_complex(z)
        for step in self.steps:
            mask |= step.singular(f)
            f = step.evaluate(f)
        return mask

    def image(self, z: complex) -> complex:
        """Image of a single point; ∞ passes through Möbius steps."""
        for step in self.steps:
            if isinstance(step, Mobius):
                z = step.image(z)
            elif is_infinite(z):
                raise GeometryError(
                    code=ErrorCode.SINGULAR_POINT,
                    message="∞ can only pass through Möbius steps",
                    details={"map": type(step).__name__},
                )
            else:
                z = complex(step.evaluate(np.asarray(z, complex)))
        return z

    def abs_derivative(self, z: complex) -> float:
        """|F'(z)|, switching to the chart −1/z wherever ∞ is met."""
        total = 1.0
        for step in self.steps:
            if isinstance(step, Mobius):
                total *= step.abs_derivative(z)
                z = step.image(z)
            elif is_infinite(z):
                raise GeometryError(
                    code=ErrorCode.SINGULAR_POINT,
                    message="derivative at ∞ needs a Möbius step",
                    details={"map": type(step).__name__},
                )
            else:
                total *= float(np.abs(step.derivative(np.asarray(z, complex))))
                z = complex(step.evaluate(np.asarray(z, complex)))
        return total

    def cauchy_riemann_residual(self, points: np.ndarray, h: float = 1e-6) -> float:
        """Max relative mismatch between the analytic derivative and difference quotients."""
        z = _as_complex(points)
        fx = (self.evaluate(z + h) - self.evaluate(z - h)) / (2 * h)
        fy = (self.evaluate(z + 1j * h) - self.evaluate(z - 1j * h)) / (2 * h)
        d1 = self.derivative(z)
        scale = np.maximum(np.abs(d1), 1e-300)
        residual = np.maximum(np.abs(fy - 1j * fx), np.abs(fx - d1)) / scale
        return float(np.max(residual))


def as_chain(m: ConformalMap | MapChain) -> MapChain:
    return m if isinstance(m, MapChain) else MapChain((m,))


def covering_map(disk_map: ConformalMap, branch: float = 0.0) -> MapChain:
    """Lift of a disk map fixing 0 to the covering chart w ↦ e^{iw}."""
    return MapChain.of(ExpMap(1j), disk_map, LogMap(1j, branch))


# ---------------------------------------------------------------------------
# Geodesics and polyline geometry
# ---------------------------------------------------------------------------


def _on_circle(z: complex, tol: float = 1e-9) -> bool:
    return abs(abs(z) - 1.0) <= tol


def hyperbolic_geodesic(p: complex, q: complex, resolution: int = 256) -> CurvePath:
    """
    Polyline of the hyperbolic geodesic of 𝔻 from the boundary point p to q.

    q may be a boundary or an interior point. Circular arcs are exact; only
    the sampling is discrete.
    """
    p, q = complex(p), complex(q)
    if resolution < 2:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="resolution must be >= 2",
            details={"resolution": resolution},
        )
    if abs(p - q) < 1e-14:
        raise GeometryError(code=ErrorCode.COINCIDENT_POINTS, message="geodesic endpoints coincide")
    if not _on_circle(p):
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="geodesic start must lie on the unit circle",
            details={"p": p},
        )
    s = np.linspace(0.0, 1.0, resolution)
    marked = {"start": p, "end": q}
    if not _on_circle(q):
        if abs(q) >= 1:
            raise GeometryError(
                code=ErrorCode.INVALID_PARAMETER,
                message="geodesic end must lie in the closed disk",
                details={"q": q},
            )
        m = disk_automorphism(q)
        p_image = m.image(p)
        points = m.inverse().evaluate((1.0 - s) * p_image)
        points[0], points[-1] = p, q
        return CurvePath(points, Chart.D, marked=marked)

    chord = p + q
    if abs(chord) < 1e-12:
        points = p + s * (q - p)
        return CurvePath(points, Chart.D, marked=marked)
    center = chord / (1.0 + (p * np.conj(q)).real)
    radius = abs(p - center)
    phi_p = np.angle(p - center)
    sweep = np.angle((q - center) / (p - center))
    points = center + radius * np.exp(1j * (phi_p + s * sweep))
    points[0], points[-1] = p, q
    return CurvePath(points, Chart.D, marked=marked)


def circle_through(z1: complex, z2: complex, z3: complex) -> tuple[complex, float]:
    """Center and radius of the circle through three points."""
    w = (z3 - z1) / (z2 - z1)
    if abs(w.imag) < 1e-15:
        raise GeometryError(code=ErrorCode.COINCIDENT_POINTS, message="points are collinear")
    center = (z2 - z1) * (w - abs(w) ** 2) / (2j * w.imag) + z1
    return complex(center), abs(z1 - center)


def segment_distance(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points z (shape (..., 1)) to segments [a, b] (shape (m,))."""
    ab = b - a
    denom = np.abs(ab) ** 2
    denom = np.where(denom == 0, 1.0, denom)
    t = np.clip(((z - a) * np.conj(ab)).real / denom, 0.0, 1.0)
    return np.abs(z - (a + t * ab))


def polyline_distance(z: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Distance from each point to a polyline, chunked over the points."""
    z = _as_complex(z).ravel()
    poly = _as_complex(polyline)
    if poly.size == 1:
        return np.abs(z - poly[0])
    a, b = poly[:-1], poly[1:]
    out = np.empty(z.size)
    for start in range(0, z.size, _CHUNK):
        chunk = z[start : start + _CHUNK, None]
        out[start : start + _CHUNK] = segment_distance(chunk, a[None, :], b[None, :]).min(axis=1)
    return out


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u.real * v.imag - u.imag * v.real


def segments_cross(p1, p2, q1, q2) -> np.ndarray:
    """Proper or touching intersection of segments [p1,p2] and [q1,q2] (broadcasting)."""
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    return (d1 * d2 <= 0) & (d3 * d4 <= 0) & ~((d1 == 0) & (d2 == 0) & (d3 == 0) & (d4 == 0))


def polyline_self_intersects(points: np.ndarray) -> bool:
    """True if two non-adjacent segments of the polyline meet."""
    pts = _as_complex(points)
    a, b = pts[:-1], pts[1:]
    m = a.size
    if m < 3:
        return False
    lo = np.minimum(a.real, b.real), np.minimum(a.imag, b.imag)
    hi = np.maximum(a.real, b.real), np.maximum(a.imag, b.imag)
    for start in range(0, m, 512):
        idx = np.arange(start, min(start + 512, m))
        i = idx[:, None]
        j = np.arange(m)[None, :]
        # bounding-box prefilter
        overlap = (
            (lo[0][i] <= hi[0][j]) & (lo[0][j] <= hi[0][i]) & (lo[1][i] <= hi[1][j]) & (lo[1][j] <= hi[1][i])
        )
        overlap &= j > i + 1
        if not np.any(overlap):
            continue
        ii, jj = np.nonzero(overlap)
        ii = idx[ii]
        hits = segments_cross(a[ii], b[ii], a[jj], b[jj])
        if np.any(hits):
            return True
    return False


def polylines_intersect(first: np.ndarray, second: np.ndarray) -> bool:
    """True if any segment of one polyline meets any segment of the other."""
    p = _as_complex(first)
    q = _as_complex(second)
    a, b = p[:-1, None], p[1:, None]
    for start in range(0, q.size - 1, 1024):
        c = q[start : start + 1025][None, :-1]
        d = q[start : start + 1025][None, 1:]
        if np.any(segments_cross(a, b, c, d)):
            return True
    return False


# ---------------------------------------------------------------------------
# Regions
# ---------------------------------------------------------------------------


def _host_closure(z: np.ndarray, chart: Chart, tol: float = 1e-9) -> np.ndarray:
    if chart is Chart.H:
        return z.imag >= -tol
    return np.abs(z) <= 1 + tol


class Region(ABC):
    """A simply connected region of a canonical chart with exempt marked points."""

    chart: Chart
    exempt: tuple[complex, ...]
    exempt_radius: float

    @abstractmethod
    def inside(self, z: np.ndarray) -> np.ndarray:
        """Strict interior membership."""

    @abstractmethod
    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        """Distance to the boundary of the region."""

    def near_exempt(self, z: np.ndarray) -> np.ndarray:
        mask = np.zeros(np.shape(z), dtype=bool)
        for point in self.exempt:
            if is_infinite(point):
                mask |= np.abs(z) > 1.0 / max(self.exempt_radius, 1e-300)
            else:
                mask |= np.abs(z - point) <= self.exempt_radius
        return mask & _host_closure(z, self.chart)

    def contains_points(self, z, clearance: float = 0.0) -> np.ndarray:
        """Inside with the given clearance, or within an exempt disk."""
        z = _as_complex(z)
        ok = self.inside(z)
        if clearance > 0:
            ok = ok & (self.boundary_distance(z) > clearance)
        return ok | self.near_exempt(z)

    def bounding_box(self) -> tuple[float, float, float, float] | None:
        """(xmin, xmax, ymin, ymax) when the region is bounded."""
        return None


@dataclass(frozen=True)
class HalfPlaneRegion(Region):
    chart: Chart = Chart.H
    exempt: tuple[complex, ...] = ()
    exempt_radius: float = 0.0

    def inside(self, z: np.ndarray) -> np.ndarray:
        return _as_complex(z).imag > 0

    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(_as_complex(z).imag, 0.0)


@dataclass(frozen=True)
class DiskRegion(Region):
    center: complex = 0j
    radius: float = 1.0
    chart: Chart = Chart.D
    exempt: tuple[complex, ...] = ()
    exempt_radius: float = 0.0

    def inside(self, z: np.ndarray) -> np.ndarray:
        return np.abs(_as_complex(z) - self.center) < self.radius

    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        return np.abs(self.radius - np.abs(_as_complex(z) - self.center))

    def bounding_box(self) -> tuple[float, float, float, float]:
        c, r = self.center, self.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r


@dataclass(frozen=True)
class PolygonRegion(Region):
    """Region bounded by a closed polyline (counterclockwise, interior on the left)."""

    boundary: np.ndarray
    chart: Chart = Chart.D
    exempt: tuple[complex, ...] = ()
    exempt_radius: float = 0.0

    def __post_init__(self) -> None:
        pts = _as_complex(self.boundary)
        if pts.size < 3:
            raise GeometryError(code=ErrorCode.MALFORMED_INPUT, message="a region needs >= 3 vertices")
        if abs(pts[0] - pts[-1]) > 0:
            pts = np.append(pts, pts[0])
        area = 0.5 * float(np.sum(_cross(pts[:-1], pts[1:])))
        if area < 0:
            pts = pts[::-1].copy()
        pts.setflags(write=False)
        object.__setattr__(self, "boundary", pts)

    def winding(self, z: np.ndarray) -> np.ndarray:
        """Winding number of the boundary around each point (crossing count)."""
        z = _as_complex(z).ravel()
        a, b = self.boundary[:-1], self.boundary[1:]
        out = np.zeros(z.size, dtype=int)
        for start in range(0, z.size, _CHUNK):
            p = z[start : start + _CHUNK, None]
            up = (a.imag <= p.imag) & (b.imag > p.imag)
            down = (a.imag > p.imag) & (b.imag <= p.imag)
            side = _cross(b - a, p - a)
            out[start : start + _CHUNK] = np.sum(up & (side > 0), axis=1) - np.sum(
                down & (side < 0), axis=1
            )
        return out

    def inside(self, z: np.ndarray) -> np.ndarray:
        z = _as_complex(z)
        return (self.winding(z) != 0).reshape(z.shape)

    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        z = _as_complex(z)
        return polyline_distance(z, self.boundary).reshape(z.shape)

    def bounding_box(self) -> tuple[float, float, float, float]:
        b = self.boundary
        return float(b.real.min()), float(b.real.max()), float(b.imag.min()), float(b.imag.max())

    def with_exempt(self, points: Iterable[complex], radius: float) -> PolygonRegion:
        return PolygonRegion(self.boundary, self.chart, tuple(points), radius)


@dataclass(frozen=True)
class TubeRegion(Region):
    """Points of the host chart within distance eps of a curve."""

    curve: CurvePath
    eps: float
    chart: Chart = Chart.D
    exempt: tuple[complex, ...] = ()
    exempt_radius: float = 0.0

    def _host_inside(self, z: np.ndarray) -> np.ndarray:
        return z.imag > 0 if self.chart is Chart.H else np.abs(z) < 1

    def _host_distance(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(z.imag, 0.0) if self.chart is Chart.H else np.maximum(1 - np.abs(z), 0.0)

    def inside(self, z: np.ndarray) -> np.ndarray:
        z = _as_complex(z)
        d = polyline_distance(z, self.curve.points).reshape(z.shape)
        return (d < self.eps) & self._host_inside(z)

    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        z = _as_complex(z)
        d = polyline_distance(z, self.curve.points).reshape(z.shape)
        return np.minimum(np.abs(self.eps - d), self._host_distance(z))

    def bounding_box(self) -> tuple[float, float, float, float]:
        p = self.curve.points
        e = self.eps
        return (
            float(p.real.min() - e),
            float(p.real.max() + e),
            float(p.imag.min() - e),
            float(p.imag.max() + e),
        )


@dataclass(frozen=True)
class ComplementRegion(Region):
    """host minus the closure of `removed`."""

    host: Region
    removed: Region
    exempt: tuple[complex, ...] = ()
    exempt_radius: float = 0.0

    @property
    def chart(self) -> Chart:  # type: ignore[override]
        return self.host.chart

    def inside(self, z: np.ndarray) -> np.ndarray:
        z = _as_complex(z)
        return self.host.inside(z) & ~self.removed.inside(z)

    def boundary_distance(self, z: np.ndarray) -> np.ndarray:
        z = _as_complex(z)
        return np.minimum(self.host.boundary_distance(z), self.removed.boundary_distance(z))

    def bounding_box(self) -> tuple[float, float, float, float] | None:
        return self.host.bounding_box()


def region_contains(
    region: Region,
    curve: CurvePath,
    clearance: float = 0.0,
) -> bool:
    """
    True iff every vertex of the curve lies in the region with the given clearance.

    Vertices inside the region's exempt disks (shared marked points) only
    need to lie in the closed host domain.

    Raises:
        GeometryError: if region and curve live in different charts.
    """
    if region.chart is not curve.chart:
        raise GeometryError(
            code=ErrorCode.CHART_MISMATCH,
            message="region and curve are in different charts",
            details={"region": region.chart.value, "curve": curve.chart.value},
        )
    return bool(np.all(region.contains_points(curve.points, clearance)))


def map_curve(chain: ConformalMap, curve: CurvePath, chart: Chart | None = None) -> CurvePath:
    """Push a curve forward; marked points follow (∞ through Möbius steps)."""
    mc = as_chain(chain)
    points = mc.evaluate(_as_complex(curve.points))
    marked = {}
    for name, z in curve.marked.items():
        try:
            marked[name] = mc.image(z)
        except GeometryError:
            continue
    return CurvePath(points, chart or curve.chart, None, marked)


def map_region(
    chain: ConformalMap,
    region: PolygonRegion,
    chart: Chart | None = None,
    exempt_radius: float | None = None,
) -> PolygonRegion:
    """Push a polygon region forward through an analytic map."""
    mc = as_chain(chain)
    boundary = mc.evaluate(region.boundary)
    exempt = tuple(mc.image(z) for z in region.exempt)
    return PolygonRegion(
        boundary,
        chart or region.chart,
        exempt,
        region.exempt_radius if exempt_radius is None else exempt_radius,
    )


def _arc(start: float, stop: float, resolution: int, radius: float = 1.0, center: complex = 0j) -> np.ndarray:
    theta = np.linspace(start, stop, resolution)
    return center + radius * np.exp(1j * theta)


def curve_bounded_neighborhood(
    upper: CurvePath,
    lower: CurvePath,
    eps: float,
    resolution: int = 64,
    exempt_radius: float = 0.05,
) -> PolygonRegion:
    """
    Region of 𝔻 around a chord from −1 to 1 bounded by two chords and arcs at ±1.

    `upper` runs from −e^{−iε} to e^{iε}, `lower` from −e^{iε} to e^{−iε}.
    """
    arc_right = _arc(-eps, eps, resolution)
    arc_left = _arc(math.pi - eps, math.pi + eps, resolution)
    boundary = np.concatenate(
        [
            arc_right,
            upper.points[::-1],
            arc_left,
            lower.points,
        ]
    )
    return PolygonRegion(boundary, Chart.D, (-1 + 0j, 1 + 0j), exempt_radius)


def geodesic_neighborhood(eps: float, resolution: int = 256, exempt_radius: float = 0.05) -> PolygonRegion:
    """Domain of 𝔻 bounded by the geodesics joining ±e^{iε} and ∓e^{−iε}."""
    if not 0 < eps < math.pi / 2:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="eps must lie in (0, π/2)",
            details={"eps": eps},
        )
    upper = hyperbolic_geodesic(-np.exp(-1j * eps), np.exp(1j * eps), resolution)
    lower = hyperbolic_geodesic(-np.exp(1j * eps), np.exp(-1j * eps), resolution)
    return curve_bounded_neighborhood(upper, lower, eps, max(8, resolution // 4), exempt_radius)


def shifted_chord_maps(eps: float) -> tuple[Mobius, Mobius]:
    """Disk automorphisms carrying (−1, 1) to the upper and lower endpoint pairs."""
    upper = mobius_from_points((-1, 1, -1j), (-np.exp(-1j * eps), np.exp(1j * eps), -1j))
    lower = mobius_from_points((-1, 1, 1j), (-np.exp(1j * eps), np.exp(-1j * eps), 1j))
    return upper, lower


def chord_family_neighborhood(
    chord: CurvePath, eps: float, resolution: int = 64, exempt_radius: float = 0.05
) -> PolygonRegion:
    """Neighborhood bounded by the two automorphic images of a chord from −1 to 1."""
    up_map, low_map = shifted_chord_maps(eps)
    return curve_bounded_neighborhood(
        map_curve(up_map, chord), map_curve(low_map, chord), eps, resolution, exempt_radius
    )


def keyhole_neighborhood(eps: float, resolution: int = 128, exempt_radius: float = 0.05) -> PolygonRegion:
    """Disk of radius ε at 0 joined to the strip |Im z| < ε around [0, 1]."""
    if not 0 < eps < 1:
        raise GeometryError(
            code=ErrorCode.INVALID_PARAMETER,
            message="eps must lie in (0, 1)",
            details={"eps": eps},
        )
    x_end = math.sqrt(1 - eps * eps)
    phi = math.asin(eps)
    arc = _arc(-phi, phi, max(8, resolution // 4))
    top = np.linspace(x_end, 0.0, resolution) + 1j * eps
    semicircle = _arc(math.pi / 2, 3 * math.pi / 2, resolution, radius=eps)
    bottom = np.linspace(0.0, x_end, resolution) - 1j * eps
    boundary = np.concatenate([arc, top, semicircle, bottom])
    return PolygonRegion(boundary, Chart.D, (1 + 0j,), exempt_radius)


def tube_neighborhood(curve: CurvePath, eps: float, exempt_radius: float = 0.05) -> TubeRegion:
    exempt = tuple(z for k, z in curve.marked.items() if k in {"start", "end"} and not is_infinite(z))
    return TubeRegion(curve, eps, curve.chart, exempt, exempt_radius)
