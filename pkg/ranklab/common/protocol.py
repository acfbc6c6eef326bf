"""
Command Message Protocol
========================
Defines the message format between the command line front door and the
command handlers. Results and errors are emitted as canonical JSON so that
identical inputs produce byte-identical output.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

SIGNIFICANT_DIGITS = 15


def format_float(value: float) -> str:
    """Format a float with the fixed number of significant digits."""
    return f"{float(value):.{SIGNIFICANT_DIGITS}g}"


def canonical(value: Any) -> Any:
    """
    Convert a result tree into plain JSON types.

    Floats are rounded to 15 significant digits, numpy scalars and arrays are
    unwrapped, and non-finite floats become strings.
    """
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if isinstance(value, np.ndarray):
        return [canonical(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(float(value)):
            return str(float(value))
        return float(format_float(value))
    return value


def dumps(data: Any) -> str:
    """Serialize a result tree as canonical JSON."""
    return json.dumps(canonical(data), sort_keys=True, indent=2)


@dataclass
class Request:
    """
    Represents a command invocation.

    Attributes:
        method: The registered command name
        params: Parameters for the command handler
    """
    method: str
    params: Dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> str:
        """Serialize request to JSON string."""
        return dumps({"method": self.method, "params": self.params}) + "\n"

    @classmethod
    def from_json(cls, json_str: str) -> "Request":
        """Parse a JSON string into a Request object."""
        data = json.loads(json_str.strip())
        return cls(method=data.get("method", ""), params=data.get("params", {}))


@dataclass
class Response:
    """
    Represents a completed command.

    Attributes:
        result: The result data from the command
        exit_code: Process exit code (0 pass, 1 verification failure)
        status: "success" or "fail"
        text: Plain-text rendering printed without --json
    """
    result: Any
    exit_code: int = 0
    status: str = "success"
    text: str = ""

    def to_json(self) -> str:
        """Serialize response to JSON string with newline delimiter."""
        return dumps({"status": self.status, "result": self.result}) + "\n"

    @classmethod
    def from_json(cls, json_str: str) -> "Response":
        """Parse a JSON string into a Response object."""
        data = json.loads(json_str.strip())
        status = data.get("status", "success")
        return cls(
            result=data.get("result"),
            exit_code=0 if status == "success" else 1,
            status=status,
        )


@dataclass
class ErrorResponse:
    """
    Represents a failed command.

    Attributes:
        code: Error code from the exception hierarchy
        message: Human readable message
        details: Structured diagnostics (offending entry, frame, offset, ...)
        exit_code: Process exit code
    """
    code: str
    message: str
    details: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = 2
    status: str = "error"

    def to_json(self) -> str:
        """Serialize error response to JSON string with newline delimiter."""
        data = {
            "status": self.status,
            "error": {
                "code": self.code,
                "message": self.message,
                "details": self.details,
            },
        }
        return dumps(data) + "\n"

    @classmethod
    def from_json(cls, json_str: str) -> "ErrorResponse":
        """Parse a JSON string into an ErrorResponse object."""
        data = json.loads(json_str.strip())
        error = data.get("error", {})
        return cls(
            code=error.get("code", "UNKNOWN"),
            message=error.get("message", "Unknown error"),
            details=error.get("details", {}),
            status=data.get("status", "error"),
        )
