"""Exception hierarchy shared by all modules."""


class CorelError(Exception):
    """Base class for domain failures raised by this package."""


class ArgumentError(CorelError, ValueError):
    """Malformed input: wrong shapes, non-finite entries, bad parameters."""


class InstabilityError(CorelError):
    """A matrix or closed loop that must be stable is not.

    ``radius`` carries the offending spectral radius when it is known.
    """

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class NonConvergenceError(CorelError):
    """An iterative solver ran out of iterations."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ObservabilityError(CorelError):
    """The cost observability Gram matrix is numerically singular."""


class InsufficientDataError(CorelError):
    """The trajectory is too short for the requested construction."""


class RefusalError(CorelError):
    """Preconditions of an experiment (assumptions, excitation) are violated."""


class PlanningError(CorelError):
    """Certainty-equivalent planning on a learned latent model failed."""
