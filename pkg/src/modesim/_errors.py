"""Package exception types."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (instability, non-convergence)."""
