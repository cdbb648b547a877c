"""Exception types shared across the package."""


class OmnikitError(Exception):
    """Base class for all omnikit errors."""


class FormatError(OmnikitError):
    """A file could not be parsed or has the wrong shape."""


class ValidationError(OmnikitError):
    """Data violates a structural invariant (asymmetry, bad weights, ...)."""


class InfeasibleError(OmnikitError):
    """A constrained problem has an empty feasible set."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(OmnikitError):
    """An iterative method exhausted its budget without meeting tolerance."""
