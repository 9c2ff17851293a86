"""Exception types shared across the package."""


class SingularMatrixError(ArithmeticError):
    """A pivot fell below working precision during factorization."""


class NumericRangeError(ArithmeticError):
    """A matrix exponential (or its exponent) left the representable range."""


class NotUniquelySolvableError(ArithmeticError):
    """The Kronecker system behind L X + X R = RHS is singular."""


class QuadratureError(RuntimeError):
    """A truncated semi-infinite quadrature failed to reach its decay bound."""
