"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input: violated precondition, malformed file, inconsistent lattice."""


class GridSizeError(ValidationError):
    """Requested grid or transform exceeds the configured size budget."""


class FitError(ValidationError):
    """Power-law fit cannot be formed (too few or nonpositive points)."""


class ConvergenceError(RuntimeError):
    """Iterative solver stopped before reaching its tolerance.

    ``last_iterate`` holds the final unit vector and ``bound`` the last
    singular-value estimate, so callers can still report something.
    """

    def __init__(self, message, last_iterate=None, bound=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.bound = bound
