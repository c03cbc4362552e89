"""Exception hierarchy shared by all igbm modules."""


class IGBMError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(IGBMError, ValueError):
    """An argument or configuration value is outside its allowed domain."""


class NumericalError(IGBMError, ArithmeticError):
    """A numerical routine failed; ``diagnostics`` carries what is known."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BracketError(NumericalError):
    """Root bracket has no sign change."""


class ConvergenceError(NumericalError):
    """An iteration hit its limit before meeting its tolerance."""


class ConsistencyError(NumericalError):
    """An internal invariant of a computation was violated."""


class StatisticsError(IGBMError, ValueError):
    """Too few samples for the requested statistic."""


class ConfigError(IGBMError, ValueError):
    """Malformed or unknown configuration entries."""
