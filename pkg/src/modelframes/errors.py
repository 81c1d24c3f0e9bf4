"""Exception hierarchy shared by every module."""


class ModelFramesError(Exception):
    """Base class for all errors raised by :mod:`modelframes`."""


class InvalidLatticeError(ModelFramesError):
    pass


class BudgetExceededError(ModelFramesError):
    """Raised when an enumeration would produce more points than allowed.

    The estimated count is kept on the instance so callers can resize.
    """

    def __init__(self, message, estimated_count=None):
        super().__init__(message)
        self.estimated_count = estimated_count


class EmptyBoxError(ModelFramesError):
    pass


class NonGenericConfigurationError(ModelFramesError):
    pass


class EmptySetError(ModelFramesError):
    pass


class CoverageError(ModelFramesError):
    pass


class ResolutionError(ModelFramesError):
    pass


class ConfigurationError(ModelFramesError):
    pass


class MembershipError(ModelFramesError):
    pass


class TruncationError(ModelFramesError):
    """Raised when a truncated sum cannot meet its tail budget."""

    def __init__(self, message, tails=None):
        super().__init__(message)
        self.tails = tails or {}


class EvaluationError(ModelFramesError):
    """A sampled function returned a non-finite value."""
