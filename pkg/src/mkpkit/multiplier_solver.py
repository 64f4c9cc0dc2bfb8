"""Low-order multipliers as the kernel of an exact linear system.

For a fixed case the determining equation ``E_w(G Q) = 0`` is linear in the
coefficients of ``Q`` over a finite ansatz, so multipliers are computed as a
nullspace. Columns are assembled from the four case-independent pieces of
``G`` and cached per ansatz, so scanning many cases reuses the expensive
Euler-operator work.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .jet import DEFAULT_MAX_ORDER, JetExpr, T, X, Y, DerivIndex, _euler_poly, _poly_add, _poly_mul
from .model import CaseParams, SIGNS, is_integrable, pde_components
from .conservation_laws import Multiplier
from .scalars import MPQ

DEEP_POLY_DEGREE = 3


@dataclass(frozen=True)
class Ansatz:
    """Candidate multipliers: polynomials in (t, x, y) times jet monomials."""

    max_jet_order: int = 3
    max_jet_degree: int = 3
    max_poly_degree: int = 1

    def __post_init__(self):
        for name in ("max_jet_order", "max_jet_degree", "max_poly_degree"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
        if self.max_jet_order > 3:
            raise ValueError("multipliers are restricted to differential order <= 3")

    @property
    def jet_variables(self) -> tuple[DerivIndex, ...]:
        idx = [
            DerivIndex(a, b, c)
            for a in range(self.max_jet_order + 1)
            for b in range(self.max_jet_order + 1 - a)
            for c in range(self.max_jet_order + 1 - a - b)
        ]
        return tuple(sorted(idx, key=lambda i: (i.order, tuple(-v for v in i.as_tuple()))))

    @property
    def basis(self) -> tuple[tuple, ...]:
        return _basis(self)

    def __len__(self) -> int:
        return len(self.basis)

    def element(self, j: int) -> JetExpr:
        return JetExpr({self.basis[j]: MPQ(1)})

    def index(self) -> dict[tuple, int]:
        return _basis_index(self)

    def coordinates(self, e: JetExpr) -> dict[int, object] | None:
        """Coefficients of ``e`` in the basis, or None if ``e`` is not in the span."""
        where = self.index()
        out = {}
        for mono, c in e.items():
            j = where.get(mono)
            if j is None:
                return None
            out[j] = c
        return out

    def describe(self) -> dict:
        return {
            "max_jet_order": self.max_jet_order,
            "max_jet_degree": self.max_jet_degree,
            "max_poly_degree": self.max_poly_degree,
            "size": len(self),
        }


def _monomials(variables: Sequence[int], max_degree: int) -> list[tuple]:
    out = []
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(variables, deg):
            counts: dict[int, int] = {}
            for v in combo:
                counts[v] = counts.get(v, 0) + 1
            out.append(tuple(counts.items()))
    return out


@lru_cache(maxsize=None)
def _basis(a: Ansatz) -> tuple[tuple, ...]:
    polys = _monomials((T, X, Y), a.max_poly_degree)
    jets = _monomials([i.code for i in a.jet_variables], a.max_jet_degree)
    seen = set()
    basis = []
    for p in polys:
        for m in jets:
            mono = tuple(sorted(p + m))
            if mono not in seen:
                seen.add(mono)
                basis.append(mono)
    return tuple(basis)


@lru_cache(maxsize=None)
def _basis_index(a: Ansatz) -> dict[tuple, int]:
    return {m: j for j, m in enumerate(a.basis)}


def build_ansatz(max_jet_order: int = 3, max_jet_degree: int = 3, max_poly_degree: int = 1,
                 deep: bool = False) -> Ansatz:
    if deep:
        max_poly_degree = max(max_poly_degree, DEEP_POLY_DEGREE)
    return Ansatz(max_jet_order, max_jet_degree, max_poly_degree)


# --------------------------------------------------------------------------
# assembly


@lru_cache(maxsize=1)
def _component_columns(a: Ansatz) -> tuple[tuple[dict, ...], ...]:
    """``E_w(part_k * m_j)`` for the four case-independent parts of ``G``."""
    parts = [p.raw for _, p in pde_components(CaseParams(1, 1, 1))]
    cols = []
    for mono in a.basis:
        m = {mono: MPQ(1)}
        cols.append(tuple(_euler_poly(_poly_mul(p, m), DEFAULT_MAX_ORDER) for p in parts))
    return tuple(cols)


@dataclass
class DeterminingSystem:
    """Sparse exact matrix of the determining equation over an ansatz.

    ``rows[i]`` maps column indices to entries; ``row_keys[i]`` is the jet
    monomial whose coefficient that row collects.
    """

    case: CaseParams
    ansatz: Ansatz
    columns: list[dict]
    row_keys: list[tuple]
    rows: list[dict]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.columns)

    def column_expr(self, j: int) -> JetExpr:
        return JetExpr._wrap(self.columns[j])

    def apply(self, vector: dict) -> JetExpr:
        """``sum_j v_j E_w(G m_j)``."""
        acc: dict = {}
        for j, c in vector.items():
            acc = _poly_add(acc, self.columns[j], c)
        return JetExpr._wrap(acc)


def assemble_system(case: CaseParams, a: Ansatz) -> DeterminingSystem:
    field = case.field
    coefs = [field.coerce(c) for c, _ in pde_components(case)]
    columns = []
    for comps in _component_columns(a):
        col: dict = {}
        for c, comp in zip(coefs, comps):
            if comp:
                col = _poly_add(col, comp, c)
        columns.append({m: field.coerce(v) for m, v in col.items()})
    by_row: dict[tuple, dict] = {}
    for j, col in enumerate(columns):
        for mono, v in col.items():
            by_row.setdefault(mono, {})[j] = v
    row_keys = list(by_row)
    return DeterminingSystem(case, a, columns, row_keys, [by_row[k] for k in row_keys])


# --------------------------------------------------------------------------
# elimination


def _eliminate(rows: Iterable[dict]) -> dict[int, dict]:
    """Row-reduce sparse rows over a field.

    Rows are processed shortest first. Each row is reduced against the
    existing pivots, smallest pivot column first, and if anything survives
    it is made monic at its smallest column, which becomes a new pivot.
    Every pivot row therefore has entries only right of its pivot.
    """
    pivots: dict[int, dict] = {}
    for row in sorted(rows, key=lambda r: (len(r), sorted(r))):
        r = dict(row)
        while True:
            hits = [c for c in r if c in pivots]
            if not hits:
                break
            c = min(hits)
            factor = r.pop(c)
            for cc, v in pivots[c].items():
                if cc == c:
                    continue
                nv = r.get(cc, 0) - factor * v
                if nv:
                    r[cc] = nv
                else:
                    r.pop(cc, None)
        if not r:
            continue
        c = min(r)
        inv = 1 / r[c]
        pivots[c] = {cc: v * inv for cc, v in r.items()}
    return pivots


@dataclass
class Kernel:
    """Canonical kernel basis: one vector per free column, equal to 1 there
    and 0 on every other free column."""

    system: DeterminingSystem
    free_columns: list[int]
    vectors: list[dict]

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    @property
    def rank(self) -> int:
        return len(self.system.columns) - self.dimension

    def expressions(self) -> list[JetExpr]:
        basis = self.system.ansatz.basis
        return [JetExpr({basis[j]: c for j, c in v.items()}) for v in self.vectors]

    def multipliers(self) -> list[Multiplier]:
        case = self.system.case
        return [Multiplier(f"K{n + 1}", e, case) for n, e in enumerate(self.expressions())]

    def contains(self, e: JetExpr) -> bool:
        """Exact membership: reduce the coordinates of ``e`` by the basis."""
        coords = self.system.ansatz.coordinates(e)
        if coords is None:
            return False
        coords = {j: self.system.case.field.coerce(c) for j, c in coords.items()}
        for f, vec in zip(self.free_columns, self.vectors):
            c = coords.get(f)
            if not c:
                continue
            for j, v in vec.items():
                nv = coords.get(j, 0) - c * v
                if nv:
                    coords[j] = nv
                else:
                    coords.pop(j, None)
        return not coords


def kernel(sys: DeterminingSystem) -> Kernel:
    pivots = _eliminate(sys.rows)
    ncols = len(sys.columns)
    free = [j for j in range(ncols) if j not in pivots]
    order = sorted(pivots, reverse=True)
    one = sys.case.field.coerce(1)
    vectors = []
    for f in free:
        x = {f: one}
        for c in order:
            if c > f:
                continue
            s = 0
            for cc, v in pivots[c].items():
                if cc != c and cc in x:
                    s = s - v * x[cc]
            if s:
                x[c] = s
        vectors.append(dict(sorted(x.items())))
    return Kernel(sys, free, vectors)


def nullspace(sys: DeterminingSystem) -> list[Multiplier]:
    """Kernel basis of the determining system rendered as multipliers."""
    return kernel(sys).multipliers()


def solve_case(case: CaseParams, a: Ansatz | None = None) -> Kernel:
    return kernel(assemble_system(case, a or build_ansatz()))


def case_scan(kappa_sqs: Iterable, sign_pairs: Iterable[tuple[int, int]] | None = None,
              a: Ansatz | None = None) -> list[dict]:
    """Kernel dimension for every (kappa^2, sigma1, sigma2) in the scan."""
    a = a or build_ansatz()
    pairs = list(sign_pairs) if sign_pairs is not None else [(s1, s2) for s1 in SIGNS for s2 in SIGNS]
    seen = []
    for k in kappa_sqs:
        k = CaseParams(1, 1, k).kappa_sq
        if k not in seen:
            seen.append(k)
    table = []
    for k in seen:
        for s1, s2 in pairs:
            case = CaseParams(s1, s2, k)
            ker = solve_case(case, a)
            table.append({
                "kappa_sq": str(k),
                "sigma1": s1,
                "sigma2": s2,
                "integrable": is_integrable(case),
                "dimension": ker.dimension,
            })
    return table
