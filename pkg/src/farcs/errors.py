"""Exception types shared across the package."""


class FarcsError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(FarcsError, ValueError):
    """Invalid static parameters (pulse counts, bandwidths, solver knobs...)."""


class ShapeError(FarcsError, ValueError):
    """Array arguments with incompatible shapes or sizes."""


class DomainError(FarcsError, ValueError):
    """Value outside the mathematical domain of an operation (off-grid
    frequencies, probabilities outside (0, 1), non-integer code offsets)."""


class ResourceError(FarcsError, RuntimeError):
    """Combinatorial or memory budget exceeded before starting the work."""


class UnsupportedModeError(FarcsError, ValueError):
    """Operation is only defined for one of the bandwidth modes."""


class SolverError(FarcsError, RuntimeError):
    """Numerical failure inside an iterative solver.

    Carries the partial result (if any) in ``partial_result`` so callers can
    inspect how far the solver got before the failure.
    """

    def __init__(self, message, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result
