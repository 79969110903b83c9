"""Exception types shared across the package."""


class NispDgError(Exception):
    """Base class for all package errors."""


class ConfigError(NispDgError):
    """Invalid or malformed run configuration."""


class AdmissibilityError(NispDgError):
    """A state left the admissible set of the model."""


class ShapeError(NispDgError):
    """Array shapes are inconsistent (sample/node/mesh mismatch)."""


class SolverFailure(NispDgError):
    """Time stepping failed; carries the time and cell of the failure."""

    def __init__(self, message, t=None, cell=None):
        super().__init__(message)
        self.t = t
        self.cell = cell


class CflViolation(NispDgError):
    """A prescribed time step exceeds the CFL bound for the current state."""


class PreconditionError(NispDgError):
    """An operation was called outside its domain of validity."""


class NumericalError(NispDgError):
    """An iterative numerical procedure failed to converge."""
