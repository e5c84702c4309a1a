"""Exception hierarchy. The CLI maps these onto exit codes."""


class SpliceNetError(Exception):
    """Base class for all package errors."""


class ArgumentError(SpliceNetError, ValueError):
    """An argument violates an operation's precondition."""


class FormatError(SpliceNetError):
    """A file is unreadable as the expected format (unsupported, corrupt, truncated)."""


class DataError(SpliceNetError):
    """The data cannot support the requested operation (too few samples, missing masks...)."""


class SchemaError(SpliceNetError):
    """Feature vector lengths disagree with the feature schema."""


class TrainingError(SpliceNetError):
    """Optimisation diverged or otherwise failed."""
