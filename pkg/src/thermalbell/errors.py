"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric guards (truncation, sampling, projection) with 3, I/O failures
with 4.
"""


class ConfigError(ValueError):
    """Invalid run configuration (bad field, bad value, unknown key)."""


class NumericGuardError(RuntimeError):
    """Base class for runtime numeric guards."""


class UnderTruncationError(NumericGuardError):
    """Fock cutoff too small for the requested state or projection."""

    def __init__(self, message: str, suggested_dim: int | None = None):
        super().__init__(message)
        self.suggested_dim = suggested_dim


class ZeroProjectionError(NumericGuardError):
    """Projection has vanishing probability (e.g. photon detection on vacuum)."""


class SamplingGuardError(NumericGuardError):
    """Fringe period under-resolved by the pixel grid."""


class PermanentSizeError(NumericGuardError):
    """Permanent requested beyond the supported matrix size."""


class InsufficientFramesError(NumericGuardError):
    """Too few frames for a meaningful correlation estimate."""


class PeriodCoverageError(NumericGuardError):
    """Correlation curve does not span a full fringe period."""
