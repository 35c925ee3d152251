"""Custom exceptions for the TV-ULoG pipeline."""

from typing import Any, Optional


class TvUlogError(Exception):
    """Base exception for pipeline errors."""

    def __init__(
        self,
        message: str,
        exit_code: int = 1,
        detail: Optional[Any] = None
    ):
        self.message = message
        self.exit_code = exit_code
        self.detail = detail
        super().__init__(self.message)


class InvalidArgumentError(TvUlogError):
    """Exception raised when an argument is outside its admissible range."""

    def __init__(self, message: str, detail: Optional[Any] = None):
        super().__init__(
            message=f"Invalid argument: {message}",
            exit_code=2,
            detail=detail
        )


class DimensionMismatchError(TvUlogError):
    """Exception raised when array sizes or grids do not agree."""

    def __init__(self, message: str, expected: Any = None, actual: Any = None):
        super().__init__(
            message=f"Dimension mismatch: {message}",
            exit_code=1,
            detail={"expected": expected, "actual": actual}
        )


class EmptyInputError(TvUlogError):
    """Exception raised when a non-empty collection was required."""

    def __init__(self, what: str):
        super().__init__(
            message=f"Empty input: {what}",
            exit_code=1,
            detail={"what": what}
        )


class NumericalFailureError(TvUlogError):
    """Exception raised on non-finite iterates or factorization breakdown."""

    def __init__(self, message: str, detail: Optional[Any] = None):
        super().__init__(
            message=f"Numerical failure: {message}",
            exit_code=1,
            detail=detail
        )


class ArtifactFormatError(TvUlogError):
    """Exception raised when a persisted artifact cannot be parsed."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(
            message=f"Artifact format error: {message}",
            exit_code=1,
            detail={"path": path}
        )


class ConfigurationError(TvUlogError):
    """Exception raised when an experiment document fails validation."""

    def __init__(self, message: str, errors: Optional[list] = None):
        super().__init__(
            message=f"Configuration invalid: {message}",
            exit_code=2,
            detail={"errors": errors} if errors else None
        )
