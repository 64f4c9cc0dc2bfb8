"""Exact coefficient fields: the rationals, or Q(k) with k^2 = r for rational r.

Rationals are carried as ``gmpy2.mpq``. Elements of a proper quadratic
extension are :class:`QuadraticNumber` values ``a + b*k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational

import gmpy2
from gmpy2 import mpq

MPQ = type(mpq(0))


def as_rational(value) -> mpq:
    """Coerce ints, Fractions, mpq and strings like ``"3/4"`` to ``mpq``."""
    if isinstance(value, MPQ):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, Rational):
        return mpq(int(value.numerator), int(value.denominator))
    if isinstance(value, str):
        text = value.strip().replace(" ", "")
        if text.startswith("+"):
            text = text[1:]
        try:
            return mpq(text)
        except ValueError:
            raise ValueError(f"not a rational number: {value!r}") from None
    if isinstance(value, QuadraticNumber) and not value.b:
        return value.a
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def rational_sqrt(value) -> mpq | None:
    """Exact square root of a non-negative rational, or None if irrational."""
    q = as_rational(value)
    if q < 0:
        return None
    num, den = q.numerator, q.denominator
    if gmpy2.is_square(num) and gmpy2.is_square(den):
        return mpq(gmpy2.isqrt(num), gmpy2.isqrt(den))
    return None


class QuadraticNumber:
    """``a + b*k`` with ``k**2 == r``; arithmetic is exact and eagerly reduced."""

    __slots__ = ("a", "b", "r")

    def __init__(self, a, b, r):
        self.a = as_rational(a)
        self.b = as_rational(b)
        self.r = as_rational(r)

    def _lift(self, other):
        if isinstance(other, QuadraticNumber):
            if other.r != self.r:
                raise ValueError(f"mixing k^2={self.r} and k^2={other.r}")
            return other
        if isinstance(other, (int, MPQ, Fraction)) and not isinstance(other, bool):
            return QuadraticNumber(other, 0, self.r)
        return None

    def __add__(self, other):
        if isinstance(other, (int, MPQ)):
            return QuadraticNumber(self.a + other, self.b, self.r)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return QuadraticNumber(self.a + o.a, self.b + o.b, self.r)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.a, -self.b, self.r)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, (int, MPQ)):
            return QuadraticNumber(self.a - other, self.b, self.r)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return QuadraticNumber(self.a - o.a, self.b - o.b, self.r)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, MPQ)):
            return QuadraticNumber(self.a * other, self.b * other, self.r)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return QuadraticNumber(
            self.a * o.a + self.r * self.b * o.b, self.a * o.b + self.b * o.a, self.r
        )

    __rmul__ = __mul__

    def norm(self) -> mpq:
        return self.a * self.a - self.r * self.b * self.b

    def inverse(self) -> QuadraticNumber:
        n = self.norm()
        if not n:
            raise ZeroDivisionError("division by zero in quadratic field")
        return QuadraticNumber(self.a / n, -self.b / n, self.r)

    def __truediv__(self, other):
        if isinstance(other, (int, MPQ)):
            if not other:
                raise ZeroDivisionError("division by zero in quadratic field")
            return QuadraticNumber(self.a / other, self.b / other, self.r)
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = QuadraticNumber(1, 0, self.r)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __bool__(self) -> bool:
        return bool(self.a) or bool(self.b)

    def __eq__(self, other) -> bool:
        if isinstance(other, QuadraticNumber):
            return self.a == other.a and self.b == other.b and self.r == other.r
        if isinstance(other, (int, MPQ, Fraction)):
            return not self.b and self.a == other
        return NotImplemented

    def __hash__(self) -> int:
        if not self.b:
            return hash(self.a)
        return hash((self.a, self.b, self.r))

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * float(gmpy2.sqrt(self.r))

    def sign(self) -> int:
        """Sign of the real number, taking k as the positive root."""
        a, b = self.a, self.b
        if not b:
            return (a > 0) - (a < 0)
        if not a:
            return (b > 0) - (b < 0)
        # compare a with -b*k by squaring
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        lhs, rhs = a * a, b * b * self.r
        if lhs == rhs:
            return 0
        return (1 if a > 0 else -1) if lhs > rhs else (1 if b > 0 else -1)

    def __repr__(self) -> str:
        return f"QuadraticNumber({self.a}, {self.b}, r={self.r})"

    def __str__(self) -> str:
        return format_scalar(self)


def format_scalar(value) -> str:
    """Text form used by the expression printer: ``3/4``, ``-k``, ``(1/2+3*k)``."""
    if isinstance(value, QuadraticNumber):
        if not value.b:
            return str(value.a)
        kpart = "k" if value.b == 1 else "-k" if value.b == -1 else f"{value.b}*k"
        if not value.a:
            return kpart
        sign = "+" if value.b > 0 else "-"
        mag = abs(value.b)
        kmag = "k" if mag == 1 else f"{mag}*k"
        return f"({value.a}{sign}{kmag})"
    return str(as_rational(value))


@dataclass(frozen=True)
class Field:
    """Coefficient field selected by the value of kappa squared.

    If ``kappa_sq`` is the square of a rational, elements are plain rationals
    and ``kappa`` is that positive root; otherwise elements live in Q(k).
    """

    kappa_sq: mpq

    def __post_init__(self):
        object.__setattr__(self, "kappa_sq", as_rational(self.kappa_sq))
        if self.kappa_sq <= 0:
            raise ValueError("kappa^2 must be positive")

    @classmethod
    def from_kappa(cls, kappa) -> Field:
        k = as_rational(kappa)
        if k <= 0:
            raise ValueError("kappa must be positive")
        return cls(k * k)

    @cached_property
    def rational_kappa(self) -> mpq | None:
        return rational_sqrt(self.kappa_sq)

    @property
    def is_extension(self) -> bool:
        return self.rational_kappa is None

    @property
    def tag(self) -> str:
        return "rational" if not self.is_extension else f"kappa-sq-{self.kappa_sq}"

    @cached_property
    def kappa(self):
        if self.rational_kappa is not None:
            return self.rational_kappa
        return QuadraticNumber(0, 1, self.kappa_sq)

    def element(self, a, b=0):
        """The field element ``a + b*kappa``."""
        a = as_rational(a)
        b = as_rational(b)
        if self.rational_kappa is not None:
            return a + b * self.rational_kappa
        return QuadraticNumber(a, b, self.kappa_sq)

    def coerce(self, value):
        if isinstance(value, QuadraticNumber):
            if self.rational_kappa is not None:
                if value.r != self.kappa_sq:
                    raise ValueError("element belongs to a different field")
                return value.a + value.b * self.rational_kappa
            if value.r != self.kappa_sq:
                raise ValueError("element belongs to a different field")
            return value
        q = as_rational(value)
        return q if self.rational_kappa is not None else QuadraticNumber(q, 0, self.kappa_sq)

    def to_float(self, value) -> float:
        return float(value)

    def __str__(self) -> str:
        return self.tag


def scalar_sign(value) -> int:
    if isinstance(value, QuadraticNumber):
        return value.sign()
    q = as_rational(value)
    return (q > 0) - (q < 0)
