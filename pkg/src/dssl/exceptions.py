"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ConfigError(ValueError):
    """Inconsistent or invalid configuration."""

    def __init__(self, message, field=None):
        self.field = field
        self.message = message
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class ResourceLimitError(RuntimeError):
    """A computation would exceed a configured size limit."""


class UnsatisfiableRulesError(ValueError):
    """A rule set admits no valid label vector."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""
