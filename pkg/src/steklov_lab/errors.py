"""Exception hierarchy shared by all modules."""


class LabError(Exception):
    """Base class for every error raised by the package."""


class InputError(LabError, ValueError):
    """Malformed or out-of-contract input."""


class NumericError(LabError, ArithmeticError):
    """A numerical kernel failed (non-convergence, indefinite matrix, ...)."""

    def __init__(self, message, *, iterations=None, pivot=None):
        super().__init__(message)
        self.iterations = iterations
        self.pivot = pivot


class StructuralError(LabError):
    """Combinatorial structure is inconsistent (disconnected interior, bad gluing, ...)."""


class GenerationError(LabError):
    """A randomized generator exhausted its retry budget."""

    def __init__(self, message, *, attempts=None):
        super().__init__(message)
        self.attempts = attempts


class OracleError(LabError):
    """A brute-force oracle could not certify its answer."""


class DensityError(LabError):
    """A sample is too sparse for the requested averaging radius."""
