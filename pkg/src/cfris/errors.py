"""Exception types shared across the package."""


class CfrisError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(CfrisError):
    """Raised when a config value or combination of values is invalid."""


class NumericalError(CfrisError):
    """Raised when a matrix fails a structural check (Hermitian/PSD) or a
    linear solve breaks down."""
