"""Line solitons of the scaled family and their kinematics.

Every formula is derived from the single general solution

    u = 6 a^2 / (B cosh(a xi) + C),   xi = x + mu y - nu t,
    a^2 = nu - s2 mu^2,  B^2 = 6 s1 nu + (k^2 - 6 s1 s2) mu^2,  C = k mu,

which satisfies ``B^2 - C^2 = 6 s1 a^2``. Branch-specific expressions
(heights, speed bounds, profiles) are specialisations of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .model import CaseParams

#: evaluations closer than this to a kinematic boundary are refused
BOUNDARY_MARGIN = 1e-9
SQRT24 = math.sqrt(24.0)


class InadmissibleSolitonError(ValueError):
    pass


class ProfileConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class LineSolitonParams:
    mu: float
    nu: float
    case: CaseParams

    @property
    def a_sq(self) -> float:
        return self.nu - self.case.sigma2 * self.mu**2

    @property
    def b_sq(self) -> float:
        c = self.case
        return 6 * c.sigma1 * self.nu + (float(c.kappa_sq) - 6 * c.sigma1 * c.sigma2) * self.mu**2

    @property
    def c_term(self) -> float:
        return self.case.kappa_float * self.mu


@dataclass(frozen=True)
class SolitonGeometry:
    theta: float
    c: float
    k_norm: float


@dataclass(frozen=True)
class SpeedInterval:
    """Open interval of admissible speeds; ``c_max`` may be ``inf``."""

    c_min: float
    c_max: float

    @property
    def is_empty(self) -> bool:
        return not (self.c_min < self.c_max)

    def __contains__(self, c: float) -> bool:
        return self.c_min < c < self.c_max


@dataclass(frozen=True)
class ProfileHW:
    h: float
    w: float
    regime: str

    def __post_init__(self):
        if self.regime not in ("focussing", "defocussing"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if not (self.h > 0 and self.w > 0):
            raise ValueError("height and width must be positive")
        if self.regime == "defocussing" and not self.h * self.w < SQRT24:
            raise ProfileConstraintError(
                f"defocussing profile needs h*w < sqrt(24), got {self.h * self.w:.6g}"
            )


# --------------------------------------------------------------------------
# admissibility and the closed form


def _margins(p: LineSolitonParams) -> tuple[float, ...]:
    """Quantities that must all be positive for an admissible soliton."""
    a_sq = p.a_sq
    if p.case.sigma1 == 1:
        return (a_sq,)
    upper = float(p.case.kappa_sq) * p.mu**2 / 6 - a_sq
    return (a_sq, upper, p.mu)


def kinematic_admissible(p: LineSolitonParams) -> bool:
    return all(m > 0 for m in _margins(p))


def _check(p: LineSolitonParams) -> None:
    margins = _margins(p)
    if not all(m > 0 for m in margins):
        raise InadmissibleSolitonError(f"parameters {p} violate the kinematic condition")
    if p.case.sigma1 == -1 and min(margins[:2]) < BOUNDARY_MARGIN:
        raise InadmissibleSolitonError(
            f"parameters {p} are within {BOUNDARY_MARGIN} of the kinematic boundary"
        )


def _abc(p: LineSolitonParams) -> tuple[float, float, float]:
    _check(p)
    return math.sqrt(p.a_sq), math.sqrt(p.b_sq), p.c_term


def travelling_coordinate(p: LineSolitonParams, x, y, t):
    return np.asarray(x, dtype=float) + p.mu * np.asarray(y, dtype=float) - p.nu * t


def profile(p: LineSolitonParams, xi):
    """``U(xi)``."""
    a, b, c = _abc(p)
    xi = np.asarray(xi, dtype=float)
    return 6 * a * a / (b * np.cosh(a * xi) + c)


def soliton_u(p: LineSolitonParams, x, y, t):
    return profile(p, travelling_coordinate(p, x, y, t))


def profile_derivatives(p: LineSolitonParams, xi, n: int) -> np.ndarray:
    """``[U, U', ..., U^(n)]`` from the Leibniz rule applied to ``D * (1/D) = 1``."""
    a, b, c = _abc(p)
    xi = np.asarray(xi, dtype=float)
    ch, sh = np.cosh(a * xi), np.sinh(a * xi)
    d = [b * ch + c] + [b * a**k * (ch if k % 2 == 0 else sh) for k in range(1, n + 1)]
    r = [1.0 / d[0]]
    for k in range(1, n + 1):
        acc = sum(comb(k, j) * d[j] * r[k - j] for j in range(1, k + 1))
        r.append(-acc * r[0])
    return 6 * a * a * np.array(r)


def soliton_potential(p: LineSolitonParams, xi):
    """``W(xi) = int_{-inf}^{xi} U``, so ``w = W(x + mu y - nu t)`` is a potential."""
    a, b, c = _abc(p)
    xi = np.asarray(xi, dtype=float)
    tau = np.tanh(a * xi / 2)
    scale = 2 * math.sqrt(6.0)
    if b > abs(c):
        rho = math.sqrt((b - c) / (b + c))
        return scale * (np.arctan(rho * tau) + math.atan(rho))
    rho = math.sqrt((c - b) / (c + b))
    return scale * (np.arctanh(rho * tau) + math.atanh(rho))


def ode_residuals(p: LineSolitonParams, xi, profile_params: LineSolitonParams | None = None
                  ) -> dict[str, float]:
    """Max defects of the fourth-order travelling-wave ODE and its first integral.

    The ODE is the one belonging to ``p``; the closed form plugged into it
    comes from ``profile_params`` when given (a probe for mismatches).
    """
    s1, s2 = p.case.sigma1, p.case.sigma2
    kappa = p.case.kappa_float
    u, u1, u2, u3, u4 = profile_derivatives(profile_params or p, xi, 4)
    fourth = ((s2 * p.mu**2 - p.nu) * u2
              + s1 * (2 * u * u1**2 + u**2 * u2)
              + kappa * p.mu * (u1**2 + u * u2)
              + u4)
    first = u1**2 - (p.nu - s2 * p.mu**2 - kappa * p.mu * u / 3 - s1 * u**2 / 6) * u**2
    return {
        "fourth_order": float(np.max(np.abs(fourth))),
        "first_integral": float(np.max(np.abs(first))),
    }


def integrable_soliton_u(p: LineSolitonParams, x, y, t):
    """The specialised closed form valid for kappa^2 = 2, s2 = -s1."""
    case = p.case
    if not (case.kappa_sq == 2 and case.sigma1 * case.sigma2 == -1):
        raise ValueError("only defined for the integrable case")
    _check(p)
    s1, mu, nu = case.sigma1, p.mu, p.nu
    xi = travelling_coordinate(p, x, y, t)
    num = 3 * math.sqrt(2.0) * (nu + s1 * mu**2)
    den = math.sqrt(3 * s1 * nu + 4 * mu**2) * np.cosh(math.sqrt(nu + s1 * mu**2) * xi) + mu
    return num / den


# --------------------------------------------------------------------------
# kinematics


def geometry(p: LineSolitonParams) -> SolitonGeometry:
    k_norm = math.hypot(1.0, p.mu)
    theta = math.atan(p.mu) if math.isfinite(p.mu) else math.pi / 2
    c = p.nu / k_norm if math.isfinite(k_norm) else 0.0
    return SolitonGeometry(theta, c, k_norm)


def params_from_kinematics(case: CaseParams, theta: float, c: float) -> LineSolitonParams:
    if not -math.pi / 2 < theta < math.pi / 2:
        raise InadmissibleSolitonError("theta must lie in (-pi/2, pi/2) for finite mu")
    mu = math.tan(theta)
    return LineSolitonParams(mu, c * math.hypot(1.0, mu), case)


def speed_bounds(case: CaseParams, theta: float) -> SpeedInterval:
    """Admissible speeds ``c`` at direction ``theta`` (an open interval)."""
    if not -math.pi / 2 < theta < math.pi / 2:
        raise ValueError("theta must lie in (-pi/2, pi/2)")
    mu = math.tan(theta)
    k = math.hypot(1.0, mu)
    m2 = mu * mu / k
    s1, s2 = case.sigma1, case.sigma2
    # a^2 = nu - s2 mu^2 > 0 gives the lower bound in every branch
    lower = s2 * m2
    if s1 == 1:
        return SpeedInterval(lower, math.inf)
    if theta < 0:
        return SpeedInterval(math.nan, math.nan)
    return SpeedInterval(lower, (s2 + float(case.kappa_sq) / 6) * m2)


def height_width(p: LineSolitonParams) -> ProfileHW:
    a, b, c = _abc(p)
    regime = "focussing" if p.case.sigma1 == 1 else "defocussing"
    return ProfileHW(6 * a * a / (b + c), 2 / a, regime)


def profile_from_hw(q: ProfileHW, xi):
    xi = np.asarray(xi, dtype=float)
    hw2 = (q.h * q.w) ** 2
    ch2 = np.cosh(xi / q.w) ** 2
    if q.regime == "focussing":
        return 24 * q.h / ((hw2 + 24) * ch2 - hw2)
    return 24 * q.h / ((24 - hw2) * ch2 + hw2)


def params_from_hw(q: ProfileHW, case: CaseParams) -> LineSolitonParams:
    """Direction and speed parameters producing height ``h`` and width ``w``."""
    s1 = 1 if q.regime == "focussing" else -1
    if s1 != case.sigma1:
        raise ValueError(f"{q.regime} profile does not belong to {case}")
    a = 2 / q.w
    s = 6 * a * a / q.h  # = B + C
    mu = (s * s - 6 * s1 * a * a) / (2 * s * case.kappa_float)
    return LineSolitonParams(mu, a * a + case.sigma2 * mu * mu, case)
