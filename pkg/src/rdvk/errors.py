"""Exception hierarchy shared by every rdvk module."""


class CodecError(Exception):
    """Base class for all rdvk errors."""


class ConfigError(CodecError, ValueError):
    pass


class DimensionError(CodecError, ValueError):
    pass


class RangeError(CodecError, ValueError):
    pass


class ParseError(CodecError):
    pass


class TruncationError(ParseError):
    pass


class UnsupportedFormat(ParseError):
    pass


class VersionError(ParseError):
    pass


class BitstreamError(CodecError):
    pass


class ScheduleInvariantError(CodecError):
    pass


class OverlapError(CodecError):
    pass


class BudgetError(CodecError):
    """Raised when no candidate combination fits the requested budget."""

    def __init__(self, message, min_total=None):
        super().__init__(message)
        self.min_total = min_total


class IoError(CodecError, OSError):
    pass
