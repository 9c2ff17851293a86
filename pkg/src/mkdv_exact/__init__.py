"""Exact solutions of the focusing mKdV equation from matrix triplets.

``u_t + u_xxx + 6 u^2 u_x = 0`` is solved in closed form from a real triplet
(A, B, C) through the Sylvester/Lyapunov matrices P, Q, N.
"""

from .checks import InvariantReport, run_checks
from .errors import (NotUniquelySolvableError, NumericRangeError, QuadratureError,
                     SingularMatrixError)
from .marchenko import MarchenkoSolutions, quadrature_oracle, solve_all
from .solution import DerivativeBundle, GridRow, GridSpec, SolutionEvaluator
from .triplet import (ComplexBlock, RealBlock, Triplet, ValidationReport,
                      assemble_canonical, check_admissible, check_minimality,
                      check_positive_stable)

__version__ = "0.1.0"

__all__ = [
    "Triplet",
    "RealBlock",
    "ComplexBlock",
    "ValidationReport",
    "assemble_canonical",
    "check_admissible",
    "check_minimality",
    "check_positive_stable",
    "MarchenkoSolutions",
    "solve_all",
    "quadrature_oracle",
    "SolutionEvaluator",
    "GridSpec",
    "GridRow",
    "DerivativeBundle",
    "InvariantReport",
    "run_checks",
    "SingularMatrixError",
    "NumericRangeError",
    "NotUniquelySolvableError",
    "QuadratureError",
]
