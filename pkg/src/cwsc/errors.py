"""Exception hierarchy shared by all modules."""


class CWSCError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(CWSCError, ValueError):
    """Invalid parameters, unknown experiment ids, missing callbacks."""


class DomainError(CWSCError, ValueError):
    """Argument outside the domain of a function (e.g. |t| >= 1)."""


class SupercriticalRequired(CWSCError, ValueError):
    """Operation only defined for beta > 1."""


class DiracMeasure(CWSCError, ValueError):
    """The mixing measure is the point mass at 0 (beta = 0); no density exists."""


class OracleScaleExceeded(CWSCError, ValueError):
    """Exact enumeration oracle requested beyond its size cutoff."""


class ScaleExceeded(CWSCError, ValueError):
    """Dense computation requested beyond its dimension cap.

    ``partial`` carries whatever could still be computed (e.g. |s - m|
    when the full resolvent is out of reach).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NumericalFailure(CWSCError, ArithmeticError):
    """Iterative numerics failed to converge or a residual check failed."""


class IoError(CWSCError, OSError):
    """Output location cannot be written."""
