"""
Pydantic models for ranklab experiment files.
"""

from .experiment import (
    BoundaryConfig,
    CheckConfig,
    ExperimentConfig,
    GridConfig,
    InitialConfig,
    OperatorConfig,
    OutputConfig,
    VerifyConfig,
    config_from_text,
    load_config,
    parse_flat,
    parse_matrix,
    parse_vector,
    parse_waves,
    split_terms,
)

__all__ = [
    "BoundaryConfig",
    "CheckConfig",
    "ExperimentConfig",
    "GridConfig",
    "InitialConfig",
    "OperatorConfig",
    "OutputConfig",
    "VerifyConfig",
    "config_from_text",
    "load_config",
    "parse_flat",
    "parse_matrix",
    "parse_vector",
    "parse_waves",
    "split_terms",
]
