from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from mkpkit.jet import JetExpr, f, t, w, x, y
from mkpkit.jettext import ParseError, parse, to_text
from mkpkit.scalars import Field

FIELD = Field(2)

coef = st.tuples(st.integers(-6, 6), st.integers(-6, 6), st.integers(1, 5)).map(
    lambda abd: FIELD.element(abd[0], abd[1]) * FIELD.coerce(1) / abd[2]
)
factor = st.one_of(
    st.tuples(st.integers(0, 2), st.integers(0, 3), st.integers(0, 2)).map(lambda i: w(*i)),
    st.sampled_from([t, x, y, f(1), f(3, 2), f(4, 4)]),
)
term = st.tuples(coef, st.lists(factor, max_size=3)).map(
    lambda cf: cf[0] * _prod(cf[1])
)
exprs = st.lists(term, max_size=4).map(lambda ts: sum(ts, JetExpr()))


def _prod(items):
    out = JetExpr.constant(1)
    for it in items:
        out = out * it
    return out


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_round_trip_is_exact(e):
    text = to_text(e)
    back = parse(text, FIELD)
    assert back == e
    assert to_text(back) == text


def test_whitespace_insensitive():
    a = parse("w[0,1,0]^2*w[0,2,0] - 3/4*f2'*y", FIELD)
    b = parse("  w[ 0 , 1 , 0 ] ^ 2 * w[0,2,0]-3 / 4 * f2' * y ", FIELD)
    assert a == b == w(0, 1, 0) ** 2 * w(0, 2, 0) - JetExpr.constant(FIELD.coerce(3) / 4) * f(2, 1) * y


def test_kappa_and_constants():
    e = parse("s1*k*w[0,1,0] + s2", FIELD, {"s1": -1, "s2": 1})
    assert e == -FIELD.kappa * w(0, 1, 0) + 1


def test_zero_prints_as_zero():
    assert to_text(JetExpr()) == "0"
    assert parse("w[0,1,0] - w[0,1,0]").is_zero()


@pytest.mark.parametrize("bad", ["w[0,1]", "q*w[0,0,0]", "(x + y", "x ^ y", "f9'"])
def test_parse_errors(bad):
    with pytest.raises((ParseError, KeyError)):
        parse(bad, FIELD)
