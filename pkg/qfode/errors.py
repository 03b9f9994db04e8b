from typing import Any, Optional


class QfodeError(Exception):
    """Base class for solver errors."""


class ConfigurationError(QfodeError, ValueError):
    """Invalid or inconsistent configuration."""


class ResourceError(QfodeError, RuntimeError):
    """A qubit or dense-matrix cap would be exceeded."""


class UndefinedMetricError(QfodeError, ValueError):
    """Metric cannot be evaluated (e.g. zero reference norm)."""


class DivergenceError(QfodeError, RuntimeError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message: str, index: int, trajectory: Optional[Any] = None):
        super().__init__(message)
        self.index = index
        self.trajectory = trajectory


EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_RESOURCE = 4


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, ResourceError):
        return EXIT_RESOURCE
    if isinstance(exc, ValueError):
        # pydantic.ValidationError is a ValueError as well
        return EXIT_CONFIG
    return EXIT_FAILURE
