"""Exception types shared across the package."""


class LimitPeriodicError(Exception):
    """Base class for every error raised by this package."""


class DivisibilityError(LimitPeriodicError, ValueError):
    """A period does not divide the requested target period."""


class ScheduleError(LimitPeriodicError, ValueError):
    """A level or period is inconsistent with the group schedule."""


class DomainError(LimitPeriodicError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConditioningError(LimitPeriodicError, ArithmeticError):
    """A matrix is too badly conditioned for the requested decomposition."""


class IsolationError(LimitPeriodicError, ArithmeticError):
    """Band-edge root isolation failed on some subinterval."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class AccuracyError(LimitPeriodicError, ArithmeticError):
    """A quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class ParameterError(LimitPeriodicError, ValueError):
    """Construction parameters violate a required inequality."""


class ConstructionError(LimitPeriodicError, RuntimeError):
    """A construction step could not produce the object it promises."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
