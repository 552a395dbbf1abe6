"""Exception hierarchy shared by every nlslab module."""


class NlsLabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(NlsLabError, ValueError):
    """Invalid grid, potential or experiment configuration."""


class DomainError(NlsLabError, ValueError):
    """A parameter lies outside the range where an operation is defined."""


class CapacityError(NlsLabError):
    """The requested dense representation is too large."""


class CapabilityError(NlsLabError):
    """The operator mode does not support the requested action."""


class PreconditionError(NlsLabError, ValueError):
    """Input violates a stated precondition (e.g. a vanishing potential)."""


class NumericError(NlsLabError, ArithmeticError):
    """An iterative or time-stepping method failed numerically.

    ``residual`` carries the last relative residual (solvers) and ``time``
    the offending simulation time (time steppers) when available.
    """

    def __init__(self, message, residual=None, time=None):
        super().__init__(message)
        self.residual = residual
        self.time = time
