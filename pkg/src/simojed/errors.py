"""Exception types shared across the package."""


class SimojedError(Exception):
    """Base class for all package errors."""


class DimensionError(SimojedError):
    """Input has a missing, empty, or mismatched dimension."""


class ParameterError(SimojedError):
    """A parameter violates its validity range (e.g. a shift factor below the
    spectral norm, a non-positive scale)."""


class DegenerateInputError(SimojedError):
    """Input is numerically degenerate (zero vector, vanishing pilot energy)."""


class CapacityError(SimojedError):
    """Requested problem size exceeds a configured enumeration budget."""


class NumericError(SimojedError):
    """A numerical factorization or solve failed unexpectedly."""


class ConvergenceError(SimojedError):
    """An iterative routine failed to converge within its iteration cap.

    Carries the best estimate reached so the caller can decide whether it is
    usable anyway.
    """

    def __init__(self, message: str, best_estimate: float):
        super().__init__(message)
        self.best_estimate = best_estimate
