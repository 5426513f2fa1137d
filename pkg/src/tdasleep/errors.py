"""Exception hierarchy shared by the pipeline stages."""


class TdaSleepError(Exception):
    """Base class for all package errors."""


class InputError(TdaSleepError):
    """Bad or missing input data."""


class ParseError(InputError):
    def __init__(self, message, offset=None, line=None):
        super().__init__(message)
        self.offset = offset
        self.line = line


class CalibrationError(InputError):
    pass


class TruncationError(InputError):
    def __init__(self, message, record_index=None):
        super().__init__(message)
        self.record_index = record_index


class ChannelMissingError(InputError):
    pass


class EmptyBreathsError(TdaSleepError):
    """Fewer than two breath onsets were found; the window should be dropped."""


class EmbeddingError(TdaSleepError):
    pass


class DomainError(TdaSleepError):
    """Approximation domain has zero (or negative) width."""


class ConfigError(TdaSleepError):
    pass


class OverflowGuardError(TdaSleepError):
    pass


class MissingClassError(TdaSleepError):
    pass
