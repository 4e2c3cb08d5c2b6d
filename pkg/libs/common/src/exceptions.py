"""Custom exceptions for the critical wave lab."""

from typing import Any


class WaveLabException(Exception):
    """Base exception for the critical wave lab."""

    def __init__(
        self,
        message: str,
        exit_code: int = 3,
        details: dict[str, Any] | None = None,
    ) -> None:
        """
        Initialize exception with message and process exit code.

        Args:
            message: Error message
            exit_code: Exit code reported by the command line
            details: Optional diagnostic values
        """
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}
        super().__init__(self.message)


class ValidationException(WaveLabException):
    """Raised when inputs or manifests fail validation."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        """
        Initialize validation exception.

        Args:
            message: Validation error message
            details: Optional diagnostic values
        """
        super().__init__(message, exit_code=2, details=details)


class GridMismatchException(ValidationException):
    """Raised when fields living on different grids are combined."""

    def __init__(self, message: str = "Fields are defined on different grids") -> None:
        super().__init__(message)


class SupportException(ValidationException):
    """Raised when a cut radius or a rescaled support leaves the grid."""


class NumericalFailureException(WaveLabException):
    """Raised when a numerical procedure fails or produces non-finite values."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        """
        Initialize numerical failure exception.

        Args:
            message: Diagnostic message
            details: Optional diagnostic values
        """
        super().__init__(message, exit_code=3, details=details)


class ModulationFailureException(NumericalFailureException):
    """Raised when the modulation root finder leaves its regime."""


class UnknownSubcommandException(WaveLabException):
    """Raised when the command line receives an unknown subcommand."""

    def __init__(self, name: str) -> None:
        super().__init__(f"Unknown subcommand: {name}", exit_code=1)
