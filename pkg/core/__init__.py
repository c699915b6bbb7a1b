"""
Core Package for dllm_agent_lab

This package contains:
- config.py: Ambient configuration loader, run-config files, error types
- base.py: Base class for pipeline stages with summary logging
- utils.py: Path, hashing, seeding and JSONL helpers
"""

from core.config import (
    Config,
    ConfigurationError,
    DatasetError,
    GenerationError,
    LabError,
    NumericError,
    TraceSchemaError,
    get_config,
    load_run_config,
    setup_logging,
)

__all__ = [
    "Config",
    "ConfigurationError",
    "DatasetError",
    "GenerationError",
    "LabError",
    "NumericError",
    "TraceSchemaError",
    "get_config",
    "load_run_config",
    "setup_logging",
]
