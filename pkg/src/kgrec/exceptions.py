class KGRecError(Exception):
    """Base class for all errors raised by kgrec."""


class DataError(KGRecError, ValueError):
    """Input data is malformed or inconsistent."""


class ParseError(DataError):
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NonFiniteError(KGRecError, FloatingPointError):
    pass


class CheckpointError(KGRecError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class DigestMismatchError(CheckpointError):
    pass
