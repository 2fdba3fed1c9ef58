"""Exception hierarchy shared by all tempfade modules."""


class TempfadeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TempfadeError, ValueError):
    """Invalid scenario or run configuration.

    ``key`` names the offending configuration key (dotted path) when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class GeometryError(TempfadeError, ValueError):
    """Degenerate propagation geometry (e.g. reflector on top of an antenna)."""


class TimeRangeError(TempfadeError, ValueError):
    """A time or delay lies outside the supported range."""


class TraceFormatError(TempfadeError):
    """Malformed, truncated or unsupported trace / CSV file."""


class DegenerateError(TempfadeError, ValueError):
    """Input data carries no usable variation (constant or all-zero series)."""


class NoLOSError(TempfadeError):
    """Impulse-response tracks contain no stable minimum-delay path."""
