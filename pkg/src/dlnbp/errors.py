"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Input arrays are malformed or contain non-finite entries."""


class DomainError(ValueError):
    """A scalar function was evaluated outside its domain."""


class RankDeficientError(ValueError):
    """The matrix does not have full row rank."""


class ProblemSizeError(ValueError):
    """An exhaustive enumeration was requested on a problem that is too large."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""

    def __init__(self, message, iterate=None, history=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = history or []


class IntegrationError(RuntimeError):
    """The ODE integrator failed; ``trace`` holds the samples computed so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
