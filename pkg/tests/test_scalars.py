from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from mkpkit.scalars import Field, QuadraticNumber, as_rational, format_scalar, rational_sqrt, scalar_sign

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=12)


def q2(a, b):
    return QuadraticNumber(a, b, 2)


def test_as_rational_accepts_common_forms():
    assert as_rational(3) == 3
    assert as_rational(Fraction(3, 4)) == Fraction(3, 4)
    assert as_rational("-3/4") == Fraction(-3, 4)
    assert as_rational("+5") == 5
    with pytest.raises(ValueError):
        as_rational("pi")
    with pytest.raises(TypeError):
        as_rational(0.5)
    with pytest.raises(TypeError):
        as_rational(True)


def test_rational_sqrt():
    assert rational_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert rational_sqrt(2) is None
    assert rational_sqrt(-4) is None


def test_kappa_squared_reduces_eagerly():
    k = q2(0, 1)
    assert k * k == 2
    assert (q2(1, 1) * q2(1, -1)) == -1


@given(rationals, rationals, rationals, rationals)
def test_field_axioms_in_extension(a, b, c, d):
    x, y = q2(a, b), q2(c, d)
    assert x + y == y + x
    assert x * y == y * x
    assert (x + y) * x == x * x + y * x
    if x.norm():
        assert x * x.inverse() == 1
        assert (y / x) * x == y


@given(rationals, rationals)
def test_sign_matches_float(a, b):
    v = q2(a, b)
    expected = (float(v) > 0) - (float(v) < 0)
    assert scalar_sign(v) == expected


def test_mixing_fields_is_an_error():
    with pytest.raises(ValueError):
        QuadraticNumber(0, 1, 2) + QuadraticNumber(0, 1, 3)


def test_field_selection():
    assert Field(2).is_extension and Field(2).tag == "kappa-sq-2"
    assert Field(Fraction(9, 4)).kappa == Fraction(3, 2)
    assert Field(Fraction(9, 4)).tag == "rational"
    assert Field(2).coerce(3) == q2(3, 0)
    assert Field.from_kappa(Fraction(1, 2)).kappa_sq == Fraction(1, 4)
    with pytest.raises(ValueError):
        Field(0)


def test_format_scalar():
    assert format_scalar(Fraction(3, 4)) == "3/4"
    assert format_scalar(q2(0, -1)) == "-k"
    assert format_scalar(q2(Fraction(1, 2), 3)) == "(1/2+3*k)"
