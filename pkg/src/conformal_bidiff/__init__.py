"""Exact and numerical verification of conformally covariant bidifferential operators."""
from __future__ import annotations

__version__ = "0.1.0"

from .exact_ring import ParamPoly, ParamRat
from .invariant_calculus import InvariantKernel, apply_word
from .words import Gen, OperatorExpr

__all__ = ["Gen", "InvariantKernel", "OperatorExpr", "ParamPoly", "ParamRat", "apply_word", "__version__"]
