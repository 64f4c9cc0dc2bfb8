"""Infix text form of jet expressions.

Grammar (whitespace-insensitive)::

    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := power (('*'|'/') power)*
    power  := atom ['^' INT]
    atom   := NUMBER | 't' | 'x' | 'y' | 'k' | NAME
            | 'w[' INT ',' INT ',' INT ']' | 'f' DIGIT "'"* | '(' expr ')'

``k`` is the field generator (kappa); other names must be bound through the
``constants`` argument of :func:`parse`. Printing is canonical, so
``to_text(parse(s))`` is a fixed point after one round.
"""

from __future__ import annotations

import re
from typing import Mapping

from .jet import (
    DerivIndex,
    JetExpr,
    T,
    X,
    Y,
    UnknownSymbolError,
    time_function_code,
    variable_name,
)
from .scalars import MPQ, QuadraticNumber, as_rational


class ParseError(ValueError):
    pass


def _term_text(mono: tuple, c) -> tuple[str, str]:
    """Return (sign, body) for one term."""
    factors = []
    for v, e in mono:
        name = variable_name(v)
        factors.append(name if e == 1 else f"{name}^{e}")
    mono_text = "*".join(factors)
    if isinstance(c, QuadraticNumber) and c.b and c.a:
        sign = "+"
        b = c.b
        kpart = ("+" if b > 0 else "-") + ("k" if abs(b) == 1 else f"{abs(b)}*k")
        coef_text = f"({c.a}{kpart})"
        return sign, f"{coef_text}*{mono_text}" if mono_text else coef_text
    if isinstance(c, QuadraticNumber) and c.b:
        mag = abs(c.b)
        sign = "-" if c.b < 0 else "+"
        head = "k" if mag == 1 else f"{mag}*k"
        return sign, f"{head}*{mono_text}" if mono_text else head
    if isinstance(c, QuadraticNumber):
        c = c.a
    sign = "-" if c < 0 else "+"
    mag = abs(c)
    if not mono_text:
        return sign, str(mag)
    if mag == 1:
        return sign, mono_text
    return sign, f"{mag}*{mono_text}"


def to_text(e: JetExpr) -> str:
    terms = e.terms()
    if not terms:
        return "0"
    parts = []
    for n, (mono, c) in enumerate(terms):
        sign, body = _term_text(mono, c)
        if n == 0:
            parts.append(body if sign == "+" else f"-{body}")
        else:
            parts.append(f" {sign} {body}")
    return "".join(parts)


_TOKEN = re.compile(
    r"""
    (?P<jet>w\[\s*\d+\s*,\s*\d+\s*,\s*\d+\s*\])
  | (?P<fun>f\d'*)
  | (?P<num>\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r} at {pos}")
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group()))
        pos = m.end()
    return out


def parse_variable(name: str) -> int:
    toks = _tokenize(name.strip())
    if len(toks) != 1:
        raise UnknownSymbolError(f"not a variable name: {name!r}")
    kind, text = toks[0]
    if kind == "jet":
        nums = [int(s) for s in re.findall(r"\d+", text)]
        return DerivIndex(*nums).code
    if kind == "fun":
        try:
            return time_function_code(int(text[1]), text.count("'"))
        except ValueError as exc:
            raise UnknownSymbolError(str(exc)) from None
    if kind == "name" and text in ("t", "x", "y"):
        return {"t": T, "x": X, "y": Y}[text]
    raise UnknownSymbolError(f"not a variable name: {name!r}")


class _Parser:
    def __init__(self, text: str, kappa, constants: Mapping):
        self.toks = _tokenize(text)
        self.i = 0
        self.kappa = kappa
        self.constants = constants

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, text):
        kind, val = self.take()
        if val != text:
            raise ParseError(f"expected {text!r}, got {val!r}")

    def parse(self) -> JetExpr:
        e = self.expr()
        if self.i != len(self.toks):
            raise ParseError(f"trailing input at token {self.peek()[1]!r}")
        return e

    def expr(self) -> JetExpr:
        sign = 1
        if self.peek()[1] in ("+", "-"):
            sign = -1 if self.take()[1] == "-" else 1
        e = self.term()
        if sign < 0:
            e = -e
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> JetExpr:
        e = self.power()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.power()
            if op == "*":
                e = e * rhs
            else:
                e = e / rhs
        return e

    def power(self) -> JetExpr:
        e = self.unary()
        if self.peek()[1] == "^":
            self.take()
            kind, val = self.take()
            if kind != "num":
                raise ParseError("exponent must be a non-negative integer")
            e = e ** int(val)
        return e

    def unary(self) -> JetExpr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        return self.atom()

    def atom(self) -> JetExpr:
        kind, val = self.take()
        if kind is None:
            raise ParseError("unexpected end of input")
        if kind == "num":
            return JetExpr.constant(MPQ(int(val)))
        if kind == "jet" or kind == "fun":
            return JetExpr.variable(parse_variable(val))
        if kind == "name":
            if val in ("t", "x", "y"):
                return JetExpr.variable(parse_variable(val))
            if val == "k":
                if self.kappa is None:
                    raise ParseError("'k' used but no field was given")
                return JetExpr.constant(self.kappa)
            if val in self.constants:
                value = self.constants[val]
                if not isinstance(value, (MPQ, QuadraticNumber)):
                    value = as_rational(value)
                return JetExpr.constant(value)
            raise ParseError(f"unbound name {val!r}")
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {val!r}")


def parse(text: str, field=None, constants: Mapping | None = None) -> JetExpr:
    """Parse infix text into a canonical :class:`JetExpr`.

    ``field`` supplies the value of ``k``; ``constants`` binds extra names
    such as ``s1`` and ``s2``.
    """
    kappa = field.kappa if field is not None else None
    return _Parser(text, kappa, constants or {}).parse()
