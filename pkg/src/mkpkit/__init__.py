"""Exact conservation-law machinery and soliton numerics for the mKP family."""

from .scalars import Field, QuadraticNumber
from .jet import DerivIndex, JetExpr
from .model import CaseParams, CoefficientSet, is_integrable, scale_coefficients

__version__ = "0.1.0"

__all__ = [
    "CaseParams",
    "CoefficientSet",
    "DerivIndex",
    "Field",
    "JetExpr",
    "QuadraticNumber",
    "is_integrable",
    "scale_coefficients",
]
