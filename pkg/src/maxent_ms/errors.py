"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad parameters, violated invariants, malformed config."""


class CompatibilityError(ValidationError):
    """Right-hand side of the friction system is not in the range of the matrix."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-convergence, negative temperature, ...)."""

    def __init__(self, message, state=None, residual=None):
        super().__init__(message)
        self.state = state
        self.residual = residual


class ConvergenceError(NumericalError):
    """Iterative solve stopped before reaching its tolerance."""
