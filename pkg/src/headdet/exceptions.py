"""Exception types raised across the package."""


class HeadDetError(Exception):
    """Base class for all package errors."""


class InvalidBoxError(HeadDetError, ValueError):
    """A box has non-positive width or height where a positive one is required."""


class InvalidDeltaError(HeadDetError, ValueError):
    """A box delta contains non-finite values."""


class EmptyStackError(HeadDetError, ValueError):
    pass


class NoValidScaleError(HeadDetError, ValueError):
    pass


class ConfigError(HeadDetError, ValueError):
    """Invalid configuration value. ``line`` is set when parsed from a file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptySampleError(HeadDetError, ValueError):
    pass


class ShapeError(HeadDetError, ValueError):
    pass


class CacheError(HeadDetError, ValueError):
    pass


class DivergenceError(HeadDetError, FloatingPointError):
    pass


class FormatError(HeadDetError, ValueError):
    """Malformed checkpoint, image or annotation input."""


class ParseError(FormatError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PlacementError(HeadDetError, RuntimeError):
    pass


class UndefinedRecallError(HeadDetError, ValueError):
    pass
