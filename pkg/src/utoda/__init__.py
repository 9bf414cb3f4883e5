"""Graded Lie algebra flows, Toda-type lattices and their soliton solutions.

The package constructs fundamental representations of A_n in exact integer
arithmetic, integrates S-matrix-type linear flows to build the composite
group element K(x, y) = M_+(y) M_-(x)^{-1}, and verifies the induced lattice
systems (Toda, UToda(m1,m2), GToda(2,2;s,sbar)), the Jacobi-type determinant
identities behind them, the integrable substitutions they generate, and the
Wronskian construction of their soliton-like solutions.
"""

__version__ = "0.1.0"

from .algebra import (
    CartanMatrix,
    FundamentalRep,
    cartan_matrix,
    cartan_inverse,
    fundamental_rep,
    grading_operator,
    graded_generators,
    verify_chevalley,
)
from .numerics import Grid2D, ResidualReport

__all__ = [
    "CartanMatrix",
    "FundamentalRep",
    "Grid2D",
    "ResidualReport",
    "cartan_matrix",
    "cartan_inverse",
    "fundamental_rep",
    "grading_operator",
    "graded_generators",
    "verify_chevalley",
    "__version__",
]
