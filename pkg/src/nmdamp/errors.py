"""Exception hierarchy.

Configuration problems derive from ``ValueError``; anything that goes wrong
while integrating derives from :class:`NumericalError`.
"""


class ConfigurationError(ValueError):
    """Invalid model, grid or run configuration."""


class NumericalError(RuntimeError):
    """Base class for failures detected during a computation."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class QuadratureError(NumericalError):
    pass


class AccuracyError(NumericalError):
    pass


class SingularityError(NumericalError):
    pass


class ConsistencyError(NumericalError):
    pass


class PhysicalityError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass
