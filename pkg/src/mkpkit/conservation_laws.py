"""Multipliers, conservation laws and potential systems of the scaled family.

The formulas live in ``data/laws.txt`` and are parsed per case; the file is
pinned by checksum so that an unreviewed edit fails loudly on load.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np

from . import jet
from .jet import (
    DEFAULT_REDUCTION_ORDER,
    JetExpr,
    PDEReducer,
    divergence,
    euler_operator,
    numeric_function,
    substitute_time_function,
)
from .jettext import parse
from .model import LEADING, CaseParams, is_integrable, pde_expression

LAWS_SHA256 = "732c551290702d1d2da62cf24b16a0671f8abc93d0f22629d9906843abd78ebc"
MAX_MULTIPLIER_ORDER = 3
LABELS = ("1", "2", "3", "4")


class ChecksumError(RuntimeError):
    pass


class UnsupportedLawError(ValueError):
    pass


def _read_law_file() -> str:
    return resources.files("mkpkit").joinpath("data/laws.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def law_texts() -> dict[str, str]:
    """Sections of the law file keyed by header (``Q2``, ``CL3.X``, ``P4.phi_y``...)."""
    raw = _read_law_file()
    digest = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    if digest != LAWS_SHA256:
        raise ChecksumError(
            f"laws.txt checksum {digest} does not match the reviewed {LAWS_SHA256}"
        )
    sections: dict[str, list[str]] = {}
    current = None
    for line in raw.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = []
        elif current is None:
            raise ValueError(f"text outside any section: {line!r}")
        else:
            sections[current].append(stripped)
    return {k: " ".join(v) for k, v in sections.items()}


@lru_cache(maxsize=None)
def _parsed(key: str, case: CaseParams) -> JetExpr:
    return parse(law_texts()[key], case.field, case.constants())


@lru_cache(maxsize=None)
def reducer(case: CaseParams, max_order: int = DEFAULT_REDUCTION_ORDER) -> PDEReducer:
    """Shared memoising reducer modulo ``G = 0`` solved for ``w_tx``."""
    return PDEReducer(pde_expression(case), LEADING, max_order)


def _time_function_polys(f) -> dict[int, list]:
    if f is None:
        return {i: [1] for i in range(1, 5)}
    if isinstance(f, Mapping):
        return {i: list(f.get(i, [1])) for i in range(1, 5)}
    return {i: list(f) for i in range(1, 5)}


def instantiate(e: JetExpr, f=None) -> JetExpr:
    """Replace each ``f_i(t)`` by a polynomial in ``t``.

    ``f`` is a coefficient list ``[c0, c1, ...]`` applied to every ``f_i``, a
    mapping ``{i: coeffs}``, or None for ``f_i = 1``.
    """
    for i, coeffs in _time_function_polys(f).items():
        e = substitute_time_function(e, i, coeffs)
    return e


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Multiplier:
    label: str
    expr: JetExpr
    case: CaseParams

    def __post_init__(self):
        order = self.expr.max_jet_order()
        if order > MAX_MULTIPLIER_ORDER:
            raise ValueError(
                f"multiplier {self.label} has differential order {order} > {MAX_MULTIPLIER_ORDER}"
            )

    @property
    def order(self) -> int:
        return max(self.expr.max_jet_order(), 0)

    def instance(self, f=None) -> JetExpr:
        return instantiate(self.expr, f)


@dataclass(frozen=True)
class ConservationLaw:
    label: str
    T: JetExpr
    X: JetExpr
    Y: JetExpr
    multiplier: Multiplier

    @property
    def case(self) -> CaseParams:
        return self.multiplier.case

    def instantiate(self, f=None) -> ConservationLaw:
        q = self.multiplier
        return ConservationLaw(
            self.label,
            instantiate(self.T, f),
            instantiate(self.X, f),
            instantiate(self.Y, f),
            Multiplier(q.label, q.instance(f), q.case),
        )


@dataclass(frozen=True)
class PotentialSystem:
    label: str
    phi_x: JetExpr
    phi_y: JetExpr
    case: CaseParams


@dataclass
class VerificationReport:
    label: str
    check: str
    mode: str
    ok: bool
    residual: JetExpr
    elapsed: float | None = None

    @property
    def residual_monomial_count(self) -> int:
        return len(self.residual)

    @property
    def witness(self) -> str | None:
        """One surviving term of the residual, in text form."""
        if self.residual.is_zero():
            return None
        mono, c = self.residual.terms()[0]
        return JetExpr({mono: c}).to_text()

    def to_dict(self, timings: bool = False) -> dict:
        return {
            "label": self.label,
            "check": self.check,
            "mode": self.mode,
            "ok": self.ok,
            "residual_monomial_count": self.residual_monomial_count,
            "witness": self.witness,
            "elapsed": round(self.elapsed, 6) if timings and self.elapsed is not None else None,
        }


# --------------------------------------------------------------------------
# builtin data


def multiplier_formula(label: str, case: CaseParams) -> Multiplier:
    """``Q1``..``Q4`` with the time functions left formal."""
    n = label.lstrip("Q")
    if n not in LABELS:
        raise UnsupportedLawError(f"unknown multiplier {label!r}")
    return Multiplier(f"Q{n}", _parsed(f"Q{n}", case), case)


def _active_labels(case: CaseParams) -> tuple[str, ...]:
    return LABELS if is_integrable(case) else LABELS[:2]


def builtin_multipliers(case: CaseParams) -> list[Multiplier]:
    """Q1, Q2 for every case; Q3, Q4 as well in the integrable case."""
    return [multiplier_formula(f"Q{n}", case) for n in _active_labels(case)]


def conservation_law(label: str, case: CaseParams) -> ConservationLaw:
    n = label.lstrip("CL")
    if n not in LABELS:
        raise UnsupportedLawError(f"unknown conservation law {label!r}")
    return ConservationLaw(
        f"CL{n}",
        JetExpr(),
        _parsed(f"CL{n}.X", case),
        _parsed(f"CL{n}.Y", case),
        multiplier_formula(f"Q{n}", case),
    )


def builtin_conservation_laws(case: CaseParams) -> list[ConservationLaw]:
    return [conservation_law(f"CL{n}", case) for n in _active_labels(case)]


# --------------------------------------------------------------------------
# verification


def determining_residual(expr: JetExpr, case: CaseParams) -> JetExpr:
    """``E_w(G * Q)``; zero exactly when ``Q`` is a multiplier."""
    return euler_operator(pde_expression(case) * expr)


def verify_determining(q: Multiplier) -> VerificationReport:
    start = time.perf_counter()
    residual = determining_residual(q.expr, q.case)
    return VerificationReport(
        q.label, "determining", "exact", residual.is_zero(), residual,
        time.perf_counter() - start,
    )


def characteristic_residual(law: ConservationLaw, max_order: int = DEFAULT_REDUCTION_ORDER) -> JetExpr:
    """``D_t T + D_x X + D_y Y - G Q`` before any reduction."""
    div = divergence(law.X, law.Y, law.T, max_order)
    return div - pde_expression(law.case) * law.multiplier.expr


def verify_characteristic(law: ConservationLaw,
                          max_order: int = DEFAULT_REDUCTION_ORDER) -> VerificationReport:
    """Certify the characteristic form, exactly if possible, else modulo the PDE."""
    start = time.perf_counter()
    residual = characteristic_residual(law, max_order)
    if residual.is_zero():
        return VerificationReport(law.label, "characteristic", "exact", True, residual,
                                  time.perf_counter() - start)
    reduced = reducer(law.case, max_order).reduce(residual)
    return VerificationReport(law.label, "characteristic", "modulo-pde", reduced.is_zero(),
                              reduced, time.perf_counter() - start)


def potential_system(law: ConservationLaw) -> PotentialSystem:
    """The transcribed ``(phi_x, phi_y)`` for one of the builtin laws."""
    n = law.label.lstrip("CL")
    if n not in LABELS:
        raise UnsupportedLawError(f"no potential system for {law.label!r}")
    builtin = conservation_law(law.label, law.case)
    if (law.X, law.Y, law.T) != (builtin.X, builtin.Y, builtin.T):
        raise UnsupportedLawError(f"{law.label} differs from the builtin law")
    return PotentialSystem(
        f"CL{n}", _parsed(f"P{n}.phi_x", law.case), _parsed(f"P{n}.phi_y", law.case), law.case
    )


def verify_potential_system(ps: PotentialSystem,
                            max_order: int = DEFAULT_REDUCTION_ORDER) -> VerificationReport:
    """``D_y phi_x - D_x phi_y`` must vanish modulo the PDE."""
    start = time.perf_counter()
    residual = (jet.total_derivative(ps.phi_x, "y", max_order)
                - jet.total_derivative(ps.phi_y, "x", max_order))
    mode = "exact"
    if not residual.is_zero():
        residual = reducer(ps.case, max_order).reduce(residual)
        mode = "modulo-pde"
    return VerificationReport(ps.label, "potential", mode, residual.is_zero(), residual,
                              time.perf_counter() - start)


def potential_matches_law(ps: PotentialSystem, law: ConservationLaw) -> bool:
    """``X = phi_y`` and ``Y = -phi_x`` once every ``f_i`` is set to 1."""
    inst = law.instantiate()
    return inst.X == ps.phi_y and inst.Y == -ps.phi_x


def verify_case(case: CaseParams) -> list[VerificationReport]:
    """Every check available for a case, in a fixed order."""
    reports = []
    for q in builtin_multipliers(case):
        reports.append(verify_determining(q))
    for law in builtin_conservation_laws(case):
        reports.append(verify_characteristic(law))
    for law in builtin_conservation_laws(case):
        reports.append(verify_potential_system(potential_system(law)))
    return reports


# --------------------------------------------------------------------------
# boundary flux


@dataclass(frozen=True)
class RectBoundary:
    """Axis-aligned rectangle traversed clockwise from the top-left corner."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("degenerate rectangle")

    @classmethod
    def centered(cls, half_x: float, half_y: float | None = None,
                 center: tuple[float, float] = (0.0, 0.0)) -> RectBoundary:
        half_y = half_x if half_y is None else half_y
        cx, cy = center
        return cls(cx - half_x, cx + half_x, cy - half_y, cy + half_y)

    def sides(self) -> list[tuple[tuple, tuple, tuple]]:
        """``(start, end, outward_normal)`` per edge in clockwise order."""
        tl = (self.x_min, self.y_max)
        tr = (self.x_max, self.y_max)
        br = (self.x_max, self.y_min)
        bl = (self.x_min, self.y_min)
        return [
            (tl, tr, (0.0, 1.0)),
            (tr, br, (1.0, 0.0)),
            (br, bl, (0.0, -1.0)),
            (bl, tl, (-1.0, 0.0)),
        ]


JetSampler = Callable[[np.ndarray, np.ndarray, float, Sequence[jet.DerivIndex]], Mapping]


class FluxIntegrand:
    """Normal flux ``(X, Y) . n`` of a law along a rectangle.

    ``sampler(x, y, t, indices)`` must return a mapping from each requested
    :class:`~mkpkit.jet.DerivIndex` to the values of that jet coordinate at
    the points ``(x, y)`` and time ``t``.
    """

    def __init__(self, law: ConservationLaw, boundary: RectBoundary, f=None):
        inst = law.instantiate(f)
        for e in (inst.X, inst.Y):
            if any(jet.is_time_function(v) for v in e.variables()):
                raise ValueError("time functions must be instantiated before numeric use")
        if not inst.T.is_zero():
            raise UnsupportedLawError("only laws with vanishing density are supported")
        self.law = inst
        self.boundary = boundary
        self._X = numeric_function(inst.X)
        self._Y = numeric_function(inst.Y)
        self.indices = sorted(set(inst.X.jet_indices()) | set(inst.Y.jet_indices()))

    def evaluate(self, jets: Mapping, x, y, t, normal) -> np.ndarray:
        values = {jet.symbol_code(k): v for k, v in jets.items()}
        values[jet.T] = t
        values[jet.X] = x
        values[jet.Y] = y
        nx, ny = normal
        out = np.zeros(np.broadcast(x, y).shape)
        if nx:
            out = out + nx * self._X(values)
        if ny:
            out = out + ny * self._Y(values)
        return out

    def __call__(self, sampler: JetSampler, t: float, side: int, s: np.ndarray) -> np.ndarray:
        """Integrand at arclength fractions ``s`` in [0, 1] of one side."""
        (x0, y0), (x1, y1), normal = self.boundary.sides()[side]
        x = x0 + (x1 - x0) * s
        y = y0 + (y1 - y0) * s
        jets = sampler(x, y, t, self.indices)
        return self.evaluate(jets, x, y, t, normal)

    def integrate(self, sampler: JetSampler, t: float, panels: int = 64, order: int = 8) -> float:
        """Composite Gauss-Legendre quadrature of the outward flux."""
        nodes, weights = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, 1.0, panels + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1] - edges[0])
        s = (mids[:, None] + half * nodes[None, :]).ravel()
        wts = np.tile(weights * half, panels)
        total = 0.0
        for side, ((x0, y0), (x1, y1), _) in enumerate(self.boundary.sides()):
            length = float(np.hypot(x1 - x0, y1 - y0))
            total += length * float(np.dot(wts, self(sampler, t, side, s)))
        return total


def charge_flux_integrand(law: ConservationLaw, boundary: RectBoundary, f=None) -> FluxIntegrand:
    return FluxIntegrand(law, boundary, f)
