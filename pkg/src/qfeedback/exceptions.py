"""Exception types raised across the package."""


class QFeedbackError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(QFeedbackError, ValueError):
    pass


class NotHermitianError(QFeedbackError, ValueError):
    pass


class InvariantError(QFeedbackError, ValueError):
    """A value failed the structural checks of its type (trace, positivity, completeness)."""


class PartitionError(QFeedbackError, ValueError):
    pass


class ParameterError(QFeedbackError, ValueError):
    pass


class HypothesisError(QFeedbackError):
    """A routine was called outside the hypothesis it relies on."""


class ChannelFormatError(QFeedbackError, ValueError):
    """Malformed channel or config file. ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
