"""Exact differential algebra on the jet space of a single field w(t, x, y).

Expressions are polynomials in

* the independent variables ``t, x, y``,
* formal time functions ``f_i^(k)`` (``i`` in 1..4, closed under ``D_t``),
* jet coordinates ``w_I`` with ``I`` a :class:`DerivIndex`.

Each variable is encoded as a small integer so that monomials are sorted
tuples of ``(code, exponent)`` pairs; a :class:`JetExpr` maps monomials to
nonzero coefficients from a :class:`~mkpkit.scalars.Field`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .scalars import MPQ, QuadraticNumber, as_rational

DEFAULT_MAX_ORDER = 8
#: order guard used when reducing modulo the PDE; substitution of the
#: solved leading term raises x-order by up to three per t-derivative removed
DEFAULT_REDUCTION_ORDER = 20

T, X, Y = 0, 1, 2
_DIRS = {"t": T, "x": X, "y": Y, T: T, X: X, Y: Y}
_INDEPENDENT_NAMES = ("t", "x", "y")

_FUN_BASE = 1000
_JET_BASE = 10000
_STRIDE = (1024, 32, 1)  # t, x, y strides inside a jet code
_ORDER_LIMIT = 31


class OrderCapError(ValueError):
    """A derivative would exceed the configured jet order."""


class UnknownSymbolError(KeyError):
    pass


@dataclass(frozen=True, order=True)
class DerivIndex:
    """Multi-index ``(t_order, x_order, y_order)`` of a partial derivative of w."""

    t_order: int = 0
    x_order: int = 0
    y_order: int = 0

    def __post_init__(self):
        for v in (self.t_order, self.x_order, self.y_order):
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"derivative orders must be non-negative ints: {self}")
            if v > _ORDER_LIMIT:
                raise OrderCapError(f"derivative order {v} beyond encodable limit")

    @property
    def order(self) -> int:
        return self.t_order + self.x_order + self.y_order

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.t_order, self.x_order, self.y_order)

    def shifted(self, direction) -> DerivIndex:
        d = _DIRS[direction]
        orders = list(self.as_tuple())
        orders[d] += 1
        return DerivIndex(*orders)

    def dominates(self, other: DerivIndex) -> bool:
        """True if ``w_self`` is a derivative of ``w_other``."""
        return all(a >= b for a, b in zip(self.as_tuple(), other.as_tuple()))

    def __sub__(self, other: DerivIndex) -> DerivIndex:
        return DerivIndex(*(a - b for a, b in zip(self.as_tuple(), other.as_tuple())))

    @property
    def code(self) -> int:
        return _JET_BASE + self.t_order * 1024 + self.x_order * 32 + self.y_order

    @staticmethod
    def from_code(code: int) -> DerivIndex:
        k = code - _JET_BASE
        return DerivIndex(k // 1024, (k % 1024) // 32, k % 32)

    def __str__(self) -> str:
        return f"w[{self.t_order},{self.x_order},{self.y_order}]"


def is_jet(code: int) -> bool:
    return code >= _JET_BASE


def is_time_function(code: int) -> bool:
    return _FUN_BASE <= code < _JET_BASE


def jet_order(code: int) -> int:
    k = code - _JET_BASE
    return k // 1024 + (k % 1024) // 32 + k % 32


#: the formal time functions are f1 .. f4
TIME_FUNCTIONS = range(1, 5)


def time_function_code(i: int, k: int = 0) -> int:
    if i not in TIME_FUNCTIONS or not 0 <= k < 100:
        raise ValueError(f"unsupported time function f{i} derivative {k}")
    return _FUN_BASE + 100 * i + k


def decode_time_function(code: int) -> tuple[int, int]:
    k = code - _FUN_BASE
    return k // 100, k % 100


def variable_name(code: int) -> str:
    if code < 3:
        return _INDEPENDENT_NAMES[code]
    if is_jet(code):
        return str(DerivIndex.from_code(code))
    i, k = decode_time_function(code)
    return f"f{i}" + "'" * k


# --------------------------------------------------------------------------
# raw monomial / polynomial kernels (dicts keyed by sorted tuples)


def _mono_mul(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    out = []
    i = j = 0
    n1, n2 = len(m1), len(m2)
    while i < n1 and j < n2:
        v1, e1 = m1[i]
        v2, e2 = m2[j]
        if v1 == v2:
            out.append((v1, e1 + e2))
            i += 1
            j += 1
        elif v1 < v2:
            out.append(m1[i])
            i += 1
        else:
            out.append(m2[j])
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out)


def _mono_replace(mono: tuple, pos: int, new_var: int | None) -> tuple:
    """Lower the exponent at ``pos`` by one and multiply by ``new_var``."""
    v, e = mono[pos]
    items = list(mono)
    if e == 1:
        del items[pos]
    else:
        items[pos] = (v, e - 1)
    if new_var is None:
        return tuple(items)
    for k, (u, f) in enumerate(items):
        if u == new_var:
            items[k] = (u, f + 1)
            return tuple(items)
        if u > new_var:
            items.insert(k, (new_var, 1))
            return tuple(items)
    items.append((new_var, 1))
    return tuple(items)


def _accumulate(target: dict, mono: tuple, coef) -> None:
    v = target.get(mono)
    if v is None:
        target[mono] = coef
    else:
        v = v + coef
        if v:
            target[mono] = v
        else:
            del target[mono]


def _poly_add(a: dict, b: dict, scale=1) -> dict:
    out = dict(a)
    for m, c in b.items():
        _accumulate(out, m, c * scale if scale != 1 else c)
    return out


def _poly_mul(a: dict, b: dict) -> dict:
    if len(a) > len(b):
        a, b = b, a
    out: dict = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            _accumulate(out, _mono_mul(m1, m2), c1 * c2)
    return out


def _poly_scale(a: dict, c) -> dict:
    if not c:
        return {}
    return {m: v * c for m, v in a.items()}


def _deriv_poly(poly: dict, d: int, max_order: int) -> dict:
    stride = _STRIDE[d]
    out: dict = {}
    for mono, c in poly.items():
        for pos, (v, e) in enumerate(mono):
            if v >= _JET_BASE:
                nv = v + stride
                if jet_order(nv) > max_order:
                    raise OrderCapError(
                        f"D_{_INDEPENDENT_NAMES[d]} of {variable_name(v)} exceeds "
                        f"order cap {max_order}"
                    )
            elif v >= _FUN_BASE:
                if d != T:
                    continue
                nv = v + 1
            else:
                if v != d:
                    continue
                nv = None
            _accumulate(out, _mono_replace(mono, pos, nv), c * e if e != 1 else c)
    return out


def _partial_poly(poly: dict, var: int) -> dict:
    out: dict = {}
    for mono, c in poly.items():
        for pos, (v, e) in enumerate(mono):
            if v == var:
                _accumulate(out, _mono_replace(mono, pos, None), c * e if e != 1 else c)
                break
    return out


def _euler_poly(poly: dict, max_order: int) -> dict:
    """Sum over I of (-D)^I dF/dw_I, evaluated by nested Horner in t, x, y."""
    by_index: dict[tuple[int, int, int], dict] = {}
    for v in {v for mono in poly for v, _ in mono if v >= _JET_BASE}:
        by_index[DerivIndex.from_code(v).as_tuple()] = _partial_poly(poly, v)
    if not by_index:
        return {}
    result: dict = {}
    for a in range(max(i[0] for i in by_index), -1, -1):
        layer_a = [i for i in by_index if i[0] == a]
        acc_b: dict = {}
        if layer_a:
            for b in range(max(i[1] for i in layer_a), -1, -1):
                layer_b = [i for i in layer_a if i[1] == b]
                acc_c: dict = {}
                if layer_b:
                    for c in range(max(i[2] for i in layer_b), -1, -1):
                        here = by_index.get((a, b, c), {})
                        acc_c = _poly_add(here, _deriv_poly(acc_c, Y, max_order), -1) if acc_c else dict(here)
                acc_b = _poly_add(acc_c, _deriv_poly(acc_b, X, max_order), -1) if acc_b else acc_c
        result = _poly_add(acc_b, _deriv_poly(result, T, max_order), -1) if result else acc_b
    return result


# --------------------------------------------------------------------------


def _check_coef(c):
    if isinstance(c, (MPQ, QuadraticNumber)):
        return c
    return as_rational(c)


class JetExpr:
    """Immutable exact polynomial on jet space.

    Terms are stored in a dict with merged duplicates and no zero
    coefficients, so two expressions are equal iff their dicts are.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping | None = None, *, _trusted: bool = False):
        if terms is None:
            self._terms = {}
        elif _trusted:
            self._terms = terms
        else:
            clean: dict = {}
            for mono, c in terms.items():
                _accumulate(clean, tuple(sorted(mono)), _check_coef(c))
            self._terms = {m: c for m, c in clean.items() if c}
        self._hash = None

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, c) -> JetExpr:
        c = _check_coef(c)
        return cls({(): c}, _trusted=True) if c else cls()

    @classmethod
    def variable(cls, code: int) -> JetExpr:
        return cls({((code, 1),): MPQ(1)}, _trusted=True)

    @classmethod
    def _wrap(cls, terms: dict) -> JetExpr:
        return cls(terms, _trusted=True)

    # protocol ------------------------------------------------------------
    @property
    def raw(self) -> dict:
        return self._terms

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other) -> bool:
        if isinstance(other, JetExpr):
            return self._terms == other._terms
        if isinstance(other, (int, MPQ, QuadraticNumber)):
            return self._terms == JetExpr.constant(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def _coerce(self, other) -> dict | None:
        if isinstance(other, JetExpr):
            return other._terms
        if isinstance(other, (int, MPQ, QuadraticNumber)) and not isinstance(other, bool):
            if isinstance(other, int):
                other = MPQ(other)
            return {(): other} if other else {}
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return JetExpr._wrap(_poly_add(self._terms, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return JetExpr._wrap(_poly_add(self._terms, o, -1))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        return JetExpr._wrap({m: -c for m, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, JetExpr):
            return JetExpr._wrap(_poly_mul(self._terms, other._terms))
        if isinstance(other, (int, MPQ, QuadraticNumber)) and not isinstance(other, bool):
            return JetExpr._wrap(_poly_scale(self._terms, other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, JetExpr):
            if len(other) == 1 and () in other._terms:
                other = other._terms[()]
            else:
                raise TypeError("can only divide a JetExpr by a constant")
        if isinstance(other, int):
            other = MPQ(other)
        if isinstance(other, (MPQ, QuadraticNumber)):
            inv = 1 / other
            return JetExpr._wrap(_poly_scale(self._terms, inv))
        return NotImplemented

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("JetExpr powers must be non-negative integers")
        result = JetExpr.constant(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # inspection ------------------------------------------------------------
    def variables(self) -> set[int]:
        return {v for mono in self._terms for v, _ in mono}

    def jet_indices(self) -> list[DerivIndex]:
        return sorted(DerivIndex.from_code(v) for v in self.variables() if v >= _JET_BASE)

    def max_jet_order(self) -> int:
        return max((i.order for i in self.jet_indices()), default=-1)

    def terms(self) -> list[tuple[tuple, object]]:
        """Terms in canonical (graded lexicographic, descending) order."""
        return sorted(self._terms.items(), key=lambda mc: monomial_sort_key(mc[0]))

    def coefficient(self, mono: tuple):
        return self._terms.get(mono, 0)

    def to_text(self) -> str:
        from .jettext import to_text

        return to_text(self)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"JetExpr({self.to_text()!r})"


def monomial_sort_key(mono: tuple):
    """Graded lexicographic key: higher degree first, then larger exponent of
    earlier variables first (variables ordered t < x < y < f's < jets)."""
    degree = sum(e for _, e in mono)
    return (-degree, tuple((v, -e) for v, e in mono))


# --------------------------------------------------------------------------
# symbol constructors

t = JetExpr.variable(T)
x = JetExpr.variable(X)
y = JetExpr.variable(Y)


def w(t_order: int = 0, x_order: int = 0, y_order: int = 0) -> JetExpr:
    """Jet coordinate ``w`` differentiated the given number of times."""
    return JetExpr.variable(DerivIndex(t_order, x_order, y_order).code)


def f(i: int, k: int = 0) -> JetExpr:
    """The ``k``-th derivative of the formal time function ``f_i``."""
    return JetExpr.variable(time_function_code(i, k))


def symbol_code(v) -> int:
    """Resolve a variable given as a single-variable JetExpr, a DerivIndex,
    an integer code or a textual name (``"x"``, ``"f2''"``, ``"w[0,1,0]"``)."""
    if isinstance(v, JetExpr):
        (mono,) = v.raw.keys() if len(v) == 1 else (None,)
        if mono is None or len(mono) != 1 or mono[0][1] != 1 or v.raw[mono] != 1:
            raise UnknownSymbolError(f"{v!r} is not a single variable")
        return mono[0][0]
    if isinstance(v, DerivIndex):
        return v.code
    if isinstance(v, int) and not isinstance(v, bool):
        if v in (T, X, Y) or is_time_function(v) or is_jet(v):
            return v
        raise UnknownSymbolError(f"unknown variable code {v}")
    if isinstance(v, str):
        from .jettext import parse_variable

        return parse_variable(v)
    raise UnknownSymbolError(f"unknown symbol {v!r}")


# --------------------------------------------------------------------------
# operations


def total_derivative(e: JetExpr, direction, max_order: int = DEFAULT_MAX_ORDER) -> JetExpr:
    """``D_t``, ``D_x`` or ``D_y`` of ``e``.

    >>> str(total_derivative(w(0, 1, 0) ** 2, "x"))
    '2*w[0,1,0]*w[0,2,0]'
    """
    return JetExpr._wrap(_deriv_poly(e.raw, _DIRS[direction], max_order))


def total_derivative_multi(e: JetExpr, index: DerivIndex, max_order: int = DEFAULT_MAX_ORDER) -> JetExpr:
    poly = e.raw
    for d, n in zip((T, X, Y), index.as_tuple()):
        for _ in range(n):
            poly = _deriv_poly(poly, d, max_order)
    return JetExpr._wrap(poly)


def jet_partial(e: JetExpr, v) -> JetExpr:
    """Formal partial derivative, treating every jet coordinate as independent."""
    return JetExpr._wrap(_partial_poly(e.raw, symbol_code(v)))


def euler_operator(e: JetExpr, max_order: int = DEFAULT_MAX_ORDER) -> JetExpr:
    """Variational derivative ``E_w``; zero exactly on total divergences."""
    return JetExpr._wrap(_euler_poly(e.raw, max_order))


def divergence(X_: JetExpr, Y_: JetExpr, T_: JetExpr | None = None,
               max_order: int = DEFAULT_MAX_ORDER) -> JetExpr:
    """``D_t T + D_x X + D_y Y``."""
    out = _poly_add(_deriv_poly(X_.raw, X, max_order), _deriv_poly(Y_.raw, Y, max_order))
    if T_ is not None:
        out = _poly_add(out, _deriv_poly(T_.raw, T, max_order))
    return JetExpr._wrap(out)


class UnboundVariablesError(KeyError):
    def __init__(self, names):
        self.names = sorted(names)
        super().__init__(f"unbound variables: {', '.join(self.names)}")


def eval_point(e: JetExpr, assignment: Mapping, field=None):
    """Evaluate ``e`` exactly at a point.

    ``assignment`` maps variables (names, codes, DerivIndex or single-variable
    expressions) to rationals. The result lies in the coefficient field of
    ``e``; pass ``field`` to coerce the result explicitly.
    """
    values = {symbol_code(k): as_rational(v) for k, v in assignment.items()}
    missing = e.variables() - values.keys()
    if missing:
        raise UnboundVariablesError(variable_name(v) for v in missing)
    total = MPQ(0)
    for mono, c in e.raw.items():
        term = c
        for v, p in mono:
            term = term * values[v] ** p
        total = total + term
    if field is not None:
        return field.coerce(total)
    return total


def substitute_time_function(e: JetExpr, i: int, poly_coeffs: Iterable) -> JetExpr:
    """Instantiate ``f_i(t)`` as the polynomial ``sum c_j t^j``.

    Every derivative symbol ``f_i^(k)`` is replaced by the k-th derivative of
    that polynomial.
    """
    coeffs = [as_rational(c) for c in poly_coeffs]

    def derivative_poly(k: int) -> dict:
        out: dict = {}
        for j, c in enumerate(coeffs):
            if j < k or not c:
                continue
            fac = 1
            for m in range(j - k + 1, j + 1):
                fac *= m
            mono = ((T, j - k),) if j - k else ()
            _accumulate(out, mono, c * fac)
        return out

    cache: dict[int, dict] = {}
    out: dict = {}
    for mono, c in e.raw.items():
        rest = []
        factor = {(): MPQ(1)}
        for v, p in mono:
            if is_time_function(v) and decode_time_function(v)[0] == i:
                k = decode_time_function(v)[1]
                if k not in cache:
                    cache[k] = derivative_poly(k)
                for _ in range(p):
                    factor = _poly_mul(factor, cache[k])
            else:
                rest.append((v, p))
        for m2, c2 in _poly_mul({tuple(rest): c}, factor).items():
            _accumulate(out, m2, c2)
    return JetExpr._wrap(out)


def set_time_functions_to_one(e: JetExpr) -> JetExpr:
    for i in TIME_FUNCTIONS:
        e = substitute_time_function(e, i, [1])
    return e


class ReductionError(ValueError):
    pass


class PDEReducer:
    """Normal forms modulo the differential ideal of ``g = w_L + h``.

    Every ``w_I`` with ``I`` dominating the leading index ``L`` is principal
    and is replaced by the reduced form of ``-D^(I-L) h``; replacements are
    memoised so a reducer can be reused across many expressions.
    """

    def __init__(self, g: JetExpr, leading: DerivIndex, max_order: int = DEFAULT_REDUCTION_ORDER):
        self.leading = leading
        self.max_order = max_order
        lead_code = leading.code
        coef = jet_partial(g, lead_code)
        if coef != JetExpr.constant(1):
            raise ReductionError(
                f"leading coefficient of {leading} must be 1, got {coef.to_text()}"
            )
        h = g - JetExpr.variable(lead_code)
        for idx in h.jet_indices():
            if idx.dominates(leading):
                raise ReductionError(f"{idx} in the tail is a derivative of the leading term")
        self._h = h
        self._table: dict[int, dict] = {lead_code: (-h).raw}

    def _is_principal(self, code: int) -> bool:
        return code >= _JET_BASE and DerivIndex.from_code(code).dominates(self.leading)

    def replacement(self, code: int) -> dict:
        if code in self._table:
            return self._table[code]
        idx = DerivIndex.from_code(code)
        if idx.order > self.max_order:
            raise OrderCapError(f"reduction needs {idx}, beyond order cap {self.max_order}")
        # peel one derivative off, preferring spatial directions
        for d in (Y, X, T):
            parent_orders = list(idx.as_tuple())
            if parent_orders[d] == 0:
                continue
            parent_orders[d] -= 1
            parent = DerivIndex(*parent_orders)
            if parent.dominates(self.leading):
                break
        else:  # pragma: no cover - unreachable for principal codes
            raise ReductionError(f"{idx} is not principal")
        base = self.replacement(parent.code)
        derived = _deriv_poly(base, d, self.max_order)
        reduced = self._reduce_raw(derived)
        self._table[code] = reduced
        return reduced

    def _reduce_raw(self, poly: dict) -> dict:
        out: dict = {}
        for mono, c in poly.items():
            if not any(self._is_principal(v) for v, _ in mono):
                _accumulate(out, mono, c)
                continue
            rest = []
            acc = {(): c}
            for v, p in mono:
                if self._is_principal(v):
                    rep = self.replacement(v)
                    for _ in range(p):
                        acc = _poly_mul(acc, rep)
                else:
                    rest.append((v, p))
            for m2, c2 in _poly_mul(acc, {tuple(rest): MPQ(1)}).items():
                _accumulate(out, m2, c2)
        return out

    def reduce(self, e: JetExpr) -> JetExpr:
        return JetExpr._wrap(self._reduce_raw(e.raw))


def reduce_mod_pde(e: JetExpr, g: JetExpr, leading: DerivIndex,
                   max_order: int = DEFAULT_REDUCTION_ORDER) -> JetExpr:
    """Normal form of ``e`` modulo ``g = 0`` solved for ``w_leading``."""
    return PDEReducer(g, leading, max_order).reduce(e)


def numeric_function(e: JetExpr):
    """Compile ``e`` to a float evaluator ``fn(values) -> array``.

    ``values`` maps variable codes to floats or numpy arrays; every variable
    of ``e`` must be present. Coefficients are rounded to double once, here.
    """
    terms = [(float(c), mono) for mono, c in e.terms()]
    needed = e.variables()

    def fn(values: Mapping):
        missing = needed - values.keys()
        if missing:
            raise UnboundVariablesError(variable_name(v) for v in missing)
        total = 0.0
        for c, mono in terms:
            term = c
            for v, p in mono:
                term = term * (values[v] if p == 1 else values[v] ** p)
            total = total + term
        return total

    fn.variables = frozenset(needed)
    return fn
