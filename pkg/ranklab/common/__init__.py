"""
Common utilities shared by the numerical modules and the command line.
"""

from .protocol import Request, Response, ErrorResponse, dumps, format_float
from .exceptions import (
    RankLabError,
    ArgumentError,
    PreconditionError,
    InconsistencyError,
    NumericError,
    DomainError,
    ConfigError,
    StabilityError,
    DivergenceError,
    FormatError,
    CommandNotFoundError,
)

__all__ = [
    'Request',
    'Response',
    'ErrorResponse',
    'dumps',
    'format_float',
    'RankLabError',
    'ArgumentError',
    'PreconditionError',
    'InconsistencyError',
    'NumericError',
    'DomainError',
    'ConfigError',
    'StabilityError',
    'DivergenceError',
    'FormatError',
    'CommandNotFoundError',
]
