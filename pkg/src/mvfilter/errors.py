"""Exception types raised by the toolkit."""


class ZeroMassError(ValueError):
    """A measure with zero (or negative) total mass where mass is required."""


class DimensionMismatchError(ValueError):
    """Operands live in different state spaces."""


class BlowupError(RuntimeError):
    """A simulated path left the configured overflow guard."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class MassUnderflowError(RuntimeError):
    """Filter weights collapsed below the resolvable mass floor."""


class CoverageError(ValueError):
    """Atoms fall outside the mollifier grid (margin included)."""


class NotPositiveDefiniteError(RuntimeError):
    """A covariance iterate lost positive semidefiniteness."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
