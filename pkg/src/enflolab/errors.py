"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InputError(ValueError):
    """Malformed or insufficient input (missing levels, role mismatch, ...)."""


class PreconditionError(ValueError):
    """A stated precondition of the operation does not hold."""


class ResourceError(RuntimeError):
    """The request exceeds a configured size cap."""


class ConvergenceError(RuntimeError):
    """A fixed-point iteration did not settle within its iteration budget."""

    def __init__(self, message, previous, last):
        super().__init__(message)
        self.previous = previous
        self.last = last


class SearchFailure(RuntimeError):
    """A constructive search exhausted its schedule without meeting the bound."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best
