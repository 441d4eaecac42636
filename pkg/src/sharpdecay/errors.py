"""Exception hierarchy.

Every error class carries the process exit code the CLI maps it to.
"""


class LatticeError(Exception):
    exit_code = 1


class ConfigError(LatticeError):
    exit_code = 2


class SpectralProximityError(LatticeError):
    """Raised when lambda sits (numerically) on the spectrum of H0."""

    exit_code = 3


class SearchFailureError(LatticeError):
    """No feasible point of the dispersion surface was found."""

    exit_code = 4

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class VerifyFailure(LatticeError):
    exit_code = 5


class DomainError(LatticeError, ValueError):
    exit_code = 6


class InsufficientDataError(LatticeError, ValueError):
    exit_code = 7


class AliasingError(LatticeError):
    exit_code = 8


class DegenerateSliceError(LatticeError):
    exit_code = 9


class InvalidMuError(LatticeError, ValueError):
    exit_code = 10


class ExceptionalLambdaError(LatticeError):
    """G0(0,0;lambda) vanishes numerically, so the single-site impurity is undefined."""

    exit_code = 11


class OutOfStripError(LatticeError, ValueError):
    exit_code = 12


class AccuracyError(LatticeError):
    exit_code = 13


class NearEigenvalueError(LatticeError):
    exit_code = 14


class ResampleError(LatticeError):
    exit_code = 15


class SiteLimitError(LatticeError, MemoryError):
    exit_code = 16


class AccuracyWarning(UserWarning):
    pass
