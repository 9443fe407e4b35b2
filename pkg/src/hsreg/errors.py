"""Exception types shared across the package."""


class HsregError(Exception):
    """Base class for all package errors."""


class ConfigError(HsregError):
    """Invalid model, prior, or run configuration."""


class DataError(HsregError):
    """Malformed or unusable input data."""


class InsufficientDataError(DataError):
    """Too few observations in the region an estimator needs.

    Carries the number of usable observations in ``count``.
    """

    def __init__(self, message: str, count: int):
        super().__init__(message)
        self.count = count


class NumericalError(HsregError):
    """A numerical routine failed to reach its accuracy or stability target.

    ``diagnostics`` holds routine-specific details (condition numbers,
    achieved tolerances, ...).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
