"""
Custom Exceptions for ranklab
=============================
Defines exception classes for error handling across the laboratory.
"""


class RankLabError(Exception):
    """Base exception for all ranklab errors."""

    def __init__(self, message: str, code: str = "RANKLAB_ERROR", details: dict = None):
        super().__init__(message)
        self.message = message
        self.code = code
        self.details = details or {}

    def to_dict(self) -> dict:
        """Convert exception to dictionary for JSON serialization."""
        return {
            "code": self.code,
            "message": self.message,
            "details": self.details,
        }


class ArgumentError(RankLabError, ValueError):
    """Raised when an argument is out of range or has the wrong shape."""

    def __init__(self, message: str, details: dict = None):
        super().__init__(message, code="ARGUMENT_ERROR", details=details)


class PreconditionError(RankLabError):
    """Raised when an input violates a documented precondition."""

    def __init__(self, message: str, details: dict = None):
        super().__init__(message, code="PRECONDITION_ERROR", details=details)


class InconsistencyError(RankLabError):
    """Raised when an exact dichotomy breaks numerically (tolerance misconfiguration)."""

    def __init__(self, message: str, details: dict = None):
        super().__init__(message, code="INCONSISTENCY_ERROR", details=details)


class NumericError(RankLabError):
    """Raised when a numerical kernel fails (eigensolver, singular solve)."""

    def __init__(self, message: str, details: dict = None):
        super().__init__(message, code="NUMERIC_ERROR", details=details)


class DomainError(RankLabError):
    """Raised when an operator is evaluated outside its admissible set."""

    def __init__(self, message: str, details: dict = None):
        super().__init__(message, code="DOMAIN_ERROR", details=details)


class ConfigError(RankLabError):
    """Raised when an experiment configuration is malformed or inconsistent."""

    def __init__(self, message: str, details: dict = None, code: str = "CONFIG_ERROR"):
        super().__init__(message, code=code, details=details)


class StabilityError(ConfigError):
    """Raised when the explicit time step violates the stability bound."""

    def __init__(self, dt: float, bound: float, frame: int = 0):
        super().__init__(
            f"Time step {dt:.6g} exceeds stability bound {bound:.6g}",
            details={"dt": dt, "bound": bound, "frame": frame},
            code="STABILITY_ERROR",
        )


class DivergenceError(RankLabError):
    """Raised when time stepping produces non-finite values."""

    def __init__(self, frame: int):
        super().__init__(
            message=f"Solution diverged at frame {frame}",
            code="DIVERGENCE_ERROR",
            details={"frame": frame},
        )


class FormatError(RankLabError):
    """Raised when a stored solution file is truncated or does not match its grid."""

    def __init__(self, message: str, offset: int = None, details: dict = None):
        details = dict(details or {})
        if offset is not None:
            details["offset"] = offset
        super().__init__(message, code="FORMAT_ERROR", details=details)


class CommandNotFoundError(RankLabError):
    """Raised when requested subcommand is not registered."""

    def __init__(self, command: str):
        super().__init__(
            message=f"Command not found: {command}",
            code="COMMAND_NOT_FOUND",
            details={"command": command},
        )
