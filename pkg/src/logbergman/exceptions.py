"""Exception types raised across the package."""


class LogBergmanError(Exception):
    """Base class for all package errors."""


class InvalidPointError(LogBergmanError, ValueError):
    """Homogeneous coordinates are all zero (or not finite)."""


class DimensionMismatchError(LogBergmanError, ValueError):
    pass


class RankDeficientError(LogBergmanError, ValueError):
    """Linear forms (or sampled sections) do not have the required rank."""


class NotOnSubvarietyError(LogBergmanError, ValueError):
    pass


class DomainError(LogBergmanError, ValueError):
    """A quantity is undefined at the requested argument (e.g. 0/0 on V)."""


class RangeError(LogBergmanError, ValueError):
    """Argument lies outside the region where an estimate is meaningful."""


class DegenerateSectionError(LogBergmanError, ValueError):
    pass


class OracleFailureError(LogBergmanError, RuntimeError):
    """Quadrature oracle did not converge between two node counts."""


class EnsembleError(LogBergmanError, RuntimeError):
    """Too many Monte Carlo samples were rejected by the root finder."""
