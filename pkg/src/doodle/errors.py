"""Exception hierarchy shared across the package."""


class DoodleError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(DoodleError):
    """Tensor shapes are inconsistent with what an operation requires."""


class ValidationError(DoodleError):
    """Inputs violate a documented precondition (channels, aspect, config)."""


class DegenerateMapError(ValidationError):
    """A semantic map is all-zero where a nonzero magnitude is required."""


class ConfigError(ValidationError):
    """A render configuration names a tap or option that does not exist."""


class WeightFormatError(DoodleError):
    """A weight file does not follow the binary format."""


class WeightTruncationError(WeightFormatError):
    """A weight file ends before a declared payload is complete."""


class NonFiniteLossError(DoodleError):
    """The objective produced NaN or Inf during optimization."""


class ImageIOError(DoodleError):
    """An image file could not be read or decoded."""
