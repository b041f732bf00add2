"""Exception hierarchy shared by all qsdlab modules."""


class QsdLabError(Exception):
    """Base class for every error raised by qsdlab."""


class DomainError(QsdLabError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class SpecFunOverflowError(QsdLabError, OverflowError):
    """A value is not representable; use the ``log_*`` companion instead."""


class ConvergenceError(QsdLabError, ArithmeticError):
    """A series, quadrature or iteration failed to reach its tolerance.

    ``estimate`` carries the achieved error estimate when one is available.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InconclusiveError(QsdLabError):
    """A numerical test could not decide between its outcomes.

    ``data`` holds the partial trajectories that were computed.
    """

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


class BracketError(QsdLabError):
    """A bisection bracket does not contain a sign change."""


class NormalizationError(QsdLabError):
    """A distribution that must have unit mass does not."""


class UnderflowError(QsdLabError, ArithmeticError):
    """A probability fell below the representable range.

    ``log_value`` carries the log-scale value that could still be computed.
    """

    def __init__(self, message, log_value=None):
        super().__init__(message)
        self.log_value = log_value
