"""Exception hierarchy shared by the library and the CLI.

Every exception carries the process exit code the CLI uses when it aborts
on it.
"""


class RadcamError(Exception):
    """Base class for all errors raised by radcam-calib."""

    exit_code: int = 1


class ConfigInvalid(RadcamError):
    """A configuration value is out of its valid domain."""

    exit_code = 2


class IoFailure(RadcamError):
    """Reading or writing an artifact failed."""

    exit_code = 3


class ArtifactVersionMismatch(RadcamError):
    """An artifact is missing, has a bad magic or an unknown version."""

    exit_code = 4


class NumericFailure(RadcamError):
    """Base class for numeric domain errors."""

    exit_code = 5


class GimbalLock(NumericFailure):
    """Euler decomposition is undefined at the requested rotation."""


class EmptyInput(NumericFailure):
    """An aggregation received no elements."""


class DegenerateNorm(NumericFailure):
    """A vector that must be normalized has (almost) zero length."""


class NonScalarLoss(NumericFailure):
    """Backward was requested from a non-scalar tensor."""


class ShapeMismatch(NumericFailure):
    """Operand shapes are incompatible."""


class EmptyDataset(NumericFailure):
    """A training or validation split has no samples."""


class EmptyWindow(NumericFailure):
    """Temporal refinement received an empty window."""


class WindowTooLarge(NumericFailure):
    """A temporal window is longer than the frame sequence."""


class Unsatisfiable(NumericFailure):
    """A scene configuration cannot be realized."""


class InsufficientFrames(NumericFailure):
    """Too many frames were rejected by the correspondence filter."""


class PredictionCountMismatch(NumericFailure):
    """The number of predictions differs from the number of samples."""
