"""Exception hierarchy shared by every module."""


class GeometryError(Exception):
    """Base class for all errors raised by alphageom."""


class DomainError(GeometryError, ValueError):
    """A parameter or argument lies outside its admissible domain."""


class SupportError(GeometryError, ValueError):
    """A sample lies outside the support of the family."""


class NotPositiveDefiniteError(GeometryError, ArithmeticError):
    """Cholesky factorization failed; the matrix is not SPD."""


class DegenerateMetricError(NotPositiveDefiniteError):
    """A computed Fisher metric is not positive definite."""


class EvaluationError(GeometryError, ArithmeticError):
    """An integrand produced a non-finite value at a quadrature node."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class UnsupportedEngineError(GeometryError, TypeError):
    """The requested expectation engine cannot handle this family or integrand."""


class ConsistencyError(GeometryError, RuntimeError):
    """Two independent evaluations of the same closed form disagree."""
