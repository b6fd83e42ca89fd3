"""Symbolic-numeric toolkit for Fuchsian systems on the Riemann sphere.

Exact transforms (folding, conformal alignment, realification), reduction of
linear systems to scalar equations, explicit index/zero-count bounds, annulus
matrix factorization with isomonodromic surgery, a recursive bound engine,
and an independent numerical oracle (integration, monodromy, argument
principle) that verifies every implemented inequality on concrete instances.
"""

from .core import (
    FuchsianSystem,
    MatrixPoly,
    PathSpec,
    Quasipolynomial,
    SpecialSystem,
    common_denominator_form,
    evaluate,
    height,
    system_from_json,
    system_to_json,
    validate_special,
)

__all__ = [
    "FuchsianSystem",
    "SpecialSystem",
    "MatrixPoly",
    "PathSpec",
    "Quasipolynomial",
    "height",
    "evaluate",
    "validate_special",
    "common_denominator_form",
    "system_to_json",
    "system_from_json",
]

__version__ = "0.1.0"
