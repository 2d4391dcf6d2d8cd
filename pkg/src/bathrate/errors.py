"""Exception types raised across the package."""


class BathrateError(Exception):
    """Base class for all package errors."""


class InvalidArgument(BathrateError, ValueError):
    pass


class InvalidSpec(BathrateError, ValueError):
    pass


class DivergenceError(BathrateError, ArithmeticError):
    """An integral or series that should converge does not."""


class UnsupportedMode(BathrateError, ValueError):
    pass


class ResourceLimit(BathrateError, MemoryError):
    """A requested Hilbert space exceeds the configured dimension cap."""


class InsufficientDecay(BathrateError, ValueError):
    """A decay curve did not relax far enough to support a rate fit."""


class ConfigError(BathrateError, ValueError):
    """Configuration problems, collected rather than raised one at a time."""

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class QuadratureWarning(UserWarning):
    pass


class ValidityWarning(UserWarning):
    """Parameters fall outside the regime where a formula is trustworthy."""


class PoorFitWarning(UserWarning):
    pass
