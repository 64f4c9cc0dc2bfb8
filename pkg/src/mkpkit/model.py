"""The mKP family, its scaled potential form and case classification."""

from __future__ import annotations

from dataclasses import dataclass

from . import jet
from .jet import DerivIndex, JetExpr
from .scalars import Field, QuadraticNumber, as_rational, rational_sqrt

SIGNS = (1, -1)
LEADING = DerivIndex(1, 1, 0)


def _sign(v) -> int:
    if v not in SIGNS:
        raise ValueError(f"sign must be +1 or -1, got {v!r}")
    return int(v)


@dataclass(frozen=True)
class CaseParams:
    """One member of the scaled family, fixed by (sigma1, sigma2, kappa^2)."""

    sigma1: int
    sigma2: int
    kappa_sq: object

    def __post_init__(self):
        object.__setattr__(self, "sigma1", _sign(self.sigma1))
        object.__setattr__(self, "sigma2", _sign(self.sigma2))
        object.__setattr__(self, "kappa_sq", as_rational(self.kappa_sq))
        if self.kappa_sq <= 0:
            raise ValueError("kappa^2 must be positive")

    @classmethod
    def from_kappa(cls, sigma1: int, sigma2: int, kappa) -> CaseParams:
        k = as_rational(kappa)
        if k <= 0:
            raise ValueError("kappa must be positive")
        return cls(sigma1, sigma2, k * k)

    @property
    def field(self) -> Field:
        return Field(self.kappa_sq)

    @property
    def kappa(self):
        return self.field.kappa

    @property
    def kappa_float(self) -> float:
        return float(self.kappa)

    @property
    def focussing(self) -> bool:
        return self.sigma1 == 1

    def constants(self) -> dict:
        """Name bindings used when parsing stored formulas."""
        return {"s1": self.sigma1, "s2": self.sigma2}

    def describe(self) -> dict:
        return {
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "kappa_sq": str(self.kappa_sq),
            "field": self.field.tag,
            "integrable": is_integrable(self),
        }

    def __str__(self) -> str:
        return f"(sigma1={self.sigma1:+d}, sigma2={self.sigma2:+d}, kappa^2={self.kappa_sq})"


def is_integrable(case: CaseParams) -> bool:
    """The integrable mKP equation: kappa^2 = 2 and sigma1*sigma2 = -1."""
    return case.kappa_sq == 2 and case.sigma1 * case.sigma2 == -1


def pde_expression(case: CaseParams) -> JetExpr:
    """``w_tx + (s1 w_x^2 + k w_y) w_xx + w_xxxx + s2 w_yy``."""
    kappa = case.kappa
    wx, wy, wxx = jet.w(0, 1, 0), jet.w(0, 0, 1), jet.w(0, 2, 0)
    return (
        jet.w(1, 1, 0)
        + (case.sigma1 * wx**2 + kappa * wy) * wxx
        + jet.w(0, 4, 0)
        + case.sigma2 * jet.w(0, 0, 2)
    )


def pde_components(case: CaseParams) -> list[tuple[object, JetExpr]]:
    """``G`` split as ``sum(coef * part)`` with case-independent parts."""
    wx, wy, wxx = jet.w(0, 1, 0), jet.w(0, 0, 1), jet.w(0, 2, 0)
    return [
        (1, jet.w(1, 1, 0) + jet.w(0, 4, 0)),
        (case.sigma1, wx**2 * wxx),
        (case.kappa, wy * wxx),
        (case.sigma2, jet.w(0, 0, 2)),
    ]


# --------------------------------------------------------------------------
# unscaled family and the scaling normalisation


class SignedSqrt:
    """A real number ``sign * sqrt(square)`` with rational ``square > 0``.

    These form a multiplicative group, which is all the scaling map needs.
    """

    __slots__ = ("sign", "square")

    def __init__(self, sign: int, square):
        self.sign = _sign(sign)
        self.square = as_rational(square)
        if self.square <= 0:
            raise ValueError("square must be positive")

    @classmethod
    def of(cls, value) -> SignedSqrt:
        if isinstance(value, SignedSqrt):
            return value
        if isinstance(value, QuadraticNumber):
            if value.a and value.b:
                raise ValueError(f"{value} is not a signed square root of a rational")
            if value.b:
                return cls(1 if value.b > 0 else -1, value.b * value.b * value.r)
            value = value.a
        q = as_rational(value)
        if not q:
            raise ValueError("zero has no signed square root form")
        return cls(1 if q > 0 else -1, q * q)

    def __mul__(self, other):
        o = SignedSqrt.of(other)
        return SignedSqrt(self.sign * o.sign, self.square * o.square)

    __rmul__ = __mul__

    def inverse(self) -> SignedSqrt:
        return SignedSqrt(self.sign, 1 / self.square)

    def __truediv__(self, other):
        return self * SignedSqrt.of(other).inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        return SignedSqrt(self.sign**n, self.square**n)

    def __eq__(self, other):
        try:
            o = SignedSqrt.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.sign == o.sign and self.square == o.square

    def __hash__(self):
        return hash((self.sign, self.square))

    def rational(self):
        r = rational_sqrt(self.square)
        return None if r is None else self.sign * r

    def __float__(self) -> float:
        return self.sign * float(self.square) ** 0.5

    def __repr__(self) -> str:
        return f"SignedSqrt({self.sign:+d}, {self.square})"


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of ``w_tx - alpha w_x^2 w_xx + kappa0 w_xx w_y + beta w_xxxx + gamma w_yy``.

    ``alpha``, ``beta``, ``gamma`` are rationals; ``kappa0`` may be a rational
    or a signed square root (e.g. ``SignedSqrt(1, 2)`` for sqrt 2).
    """

    alpha: object
    beta: object
    gamma: object
    kappa0: object

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = as_rational(getattr(self, name))
            if not v:
                raise ValueError(f"{name} must be nonzero")
            object.__setattr__(self, name, v)
        k0 = self.kappa0
        if isinstance(k0, (int, str)) or not isinstance(k0, (SignedSqrt, QuadraticNumber)):
            k0 = as_rational(k0)
            if not k0:
                raise ValueError("kappa0 must be nonzero")
        object.__setattr__(self, "kappa0", SignedSqrt.of(k0))

    def is_integrable(self) -> bool:
        """kappa0^2 = 2 alpha gamma > 0."""
        ag = self.alpha * self.gamma
        return ag > 0 and self.kappa0.square == 2 * ag


@dataclass(frozen=True)
class ScalingMap:
    """``t -> l1 t, x -> l2 x, y -> l3 y, w -> l4 w`` with each ``l_i`` a signed root."""

    lambdas: tuple

    def __iter__(self):
        return iter(self.lambdas)

    def is_identity(self) -> bool:
        return all(l == SignedSqrt(1, 1) for l in self.lambdas)

    def describe(self) -> dict:
        return {
            f"lambda{i + 1}": {"sign": l.sign, "square": str(l.square)}
            for i, l in enumerate(self.lambdas)
        }


def scale_coefficients(c: CoefficientSet) -> tuple[CaseParams, ScalingMap]:
    """Normalise an arbitrary member of the family to the scaled form.

    Uses ``l2 = 1``, ``l1 = 1/beta`` (a time reversal when beta < 0),
    ``l4^2 = |beta/alpha|``, ``l3^2 = |gamma/beta|`` and fixes the sign of
    ``l4`` so that the scaled kappa is positive. The result is checked by
    substituting the map back into the unscaled equation.
    """
    alpha, beta, gamma = c.alpha, c.beta, c.gamma
    sigma1 = -1 if alpha * beta > 0 else 1
    sigma2 = 1 if gamma * beta > 0 else -1
    kappa_sq = c.kappa0.square / abs(alpha * gamma)
    l1 = SignedSqrt.of(1 / beta)
    l2 = SignedSqrt(1, 1)
    l3 = SignedSqrt(1, abs(gamma / beta))
    l4 = SignedSqrt(1, abs(beta / alpha))
    if (c.kappa0 * l4 * l1 / (l2 * l3)).sign < 0:
        l4 = SignedSqrt(-1, l4.square)
    case = CaseParams(sigma1, sigma2, kappa_sq)
    smap = ScalingMap((l1, l2, l3, l4))
    scaled = apply_scaling(c, smap)
    expected = scaled_coefficients(case)
    if scaled != expected:  # pragma: no cover - guarded by tests
        raise AssertionError(f"scaling failed: {scaled} != {expected}")
    return case, smap


_UNSCALED_TERMS = (
    # (name, jet indices with multiplicity)
    ("w_tx", ((1, 1, 0),)),
    ("w_x^2 w_xx", ((0, 1, 0), (0, 1, 0), (0, 2, 0))),
    ("w_xx w_y", ((0, 2, 0), (0, 0, 1))),
    ("w_xxxx", ((0, 4, 0),)),
    ("w_yy", ((0, 0, 2),)),
)


def unscaled_coefficients(c: CoefficientSet) -> dict:
    return {
        "w_tx": SignedSqrt(1, 1),
        "w_x^2 w_xx": SignedSqrt.of(-c.alpha),
        "w_xx w_y": c.kappa0,
        "w_xxxx": SignedSqrt.of(c.beta),
        "w_yy": SignedSqrt.of(c.gamma),
    }


def scaled_coefficients(case: CaseParams) -> dict:
    return {
        "w_tx": SignedSqrt(1, 1),
        "w_x^2 w_xx": SignedSqrt.of(case.sigma1),
        "w_xx w_y": SignedSqrt(1, case.kappa_sq),
        "w_xxxx": SignedSqrt(1, 1),
        "w_yy": SignedSqrt.of(case.sigma2),
    }


def apply_scaling(c: CoefficientSet, smap: ScalingMap) -> dict:
    """Substitute the scaling into each monomial and renormalise ``w_tx`` to 1.

    A jet factor ``w_I`` becomes ``l4 / (l1^a l2^b l3^c) w~_I``.
    """
    l = list(smap)
    coefs = unscaled_coefficients(c)
    factors = {}
    for name, indices in _UNSCALED_TERMS:
        acc = coefs[name]
        for a, b, cc in indices:
            acc = acc * l[3] / (l[0] ** a * l[1] ** b * l[2] ** cc)
        factors[name] = acc
    norm = factors["w_tx"]
    return {name: v / norm for name, v in factors.items()}
