"""
Shared utilities for dllm_agent_lab scripts.

This package provides common functionality for the lab CLI:
- cli: Argument parsing with run-config merging
- console: Human-facing stdout formatting
- manifest: Run manifests (provenance of every output directory)
"""

from scripts.utils.cli import UsageError, build_parser, parse_args
from scripts.utils.console import (
    print_banner,
    print_completion,
    print_error,
    print_info,
    print_warning,
)
from scripts.utils.manifest import RunManifest

__all__ = [
    # CLI utilities
    'UsageError',
    'build_parser',
    'parse_args',
    # Console output
    'print_banner',
    'print_completion',
    'print_error',
    'print_info',
    'print_warning',
    # Manifests
    'RunManifest',
]
