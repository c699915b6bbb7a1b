"""
Base Stage Class for dllm_agent_lab

This module provides the base class and common functionality for pipeline
stages (data generation, training, episode running, analysis). Every stage
extends BaseStage so logging, timing and result bookkeeping look the same
across the pipeline.

Features:
- Standardized logger initialization
- Stage summary logging
- Artifact bookkeeping through StageResult

Usage:
    from core.base import BaseStage, StageResult

    class GenerateDataStage(BaseStage):
        def run(self, **kwargs) -> StageResult:
            self._start_stage()
            result = StageResult(self.stage_name)
            result.add_artifact("episodes", path, row_count=120)
            self._log_stage_summary(result)
            return result
"""

import logging
from abc import ABC, abstractmethod
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Union


class StageResult:
    """
    Container for stage outputs with metadata.

    Records which artifacts a stage wrote, how many rows each holds, and
    any non-fatal errors, so the CLI can print a summary and the run
    manifest can list output paths.
    """

    def __init__(self, stage_name: str):
        """
        Initialize a stage result container.

        Args:
            stage_name: Name of the stage (e.g. 'gen-data', 'train')
        """
        self.stage_name = stage_name
        self.started_at = datetime.now().isoformat()
        self.artifacts: Dict[str, str] = {}
        self.row_counts: Dict[str, int] = {}
        self.errors: Dict[str, str] = {}
        self.values: Dict[str, Any] = {}

    def add_artifact(
        self,
        name: str,
        path: Union[str, Path],
        row_count: int = 0
    ) -> None:
        """
        Record an artifact written by the stage.

        Args:
            name: Artifact name
            path: Where it was written
            row_count: Number of rows/records it holds
        """
        self.artifacts[name] = str(path)
        self.row_counts[name] = row_count

    def add_error(self, name: str, error_message: str) -> None:
        """Record a non-fatal error."""
        self.errors[name] = error_message

    @property
    def total_rows(self) -> int:
        """Get total row count across all artifacts."""
        return sum(self.row_counts.values())

    @property
    def success(self) -> bool:
        """A stage succeeded when it recorded no errors."""
        return not self.errors

    def to_dict(self) -> Dict[str, Any]:
        """Convert results to a dictionary."""
        return {
            'stage_name': self.stage_name,
            'started_at': self.started_at,
            'artifacts': self.artifacts,
            'row_counts': self.row_counts,
            'errors': self.errors,
            'values': self.values,
        }


class BaseStage(ABC):
    """
    Abstract base class for all pipeline stages.

    Provides common functionality:
    - Logger initialization with optional custom logger
    - Stage timing and summary logging

    Subclasses must implement:
    - run(): Execute the stage and return a StageResult
    """

    def __init__(
        self,
        stage_name: str,
        logger: Optional[logging.Logger] = None
    ):
        """
        Initialize the base stage.

        Args:
            stage_name: Name of the stage (e.g. 'train')
            logger: Optional custom logger instance. If not provided,
                   creates a logger with the class name.
        """
        self.stage_name = stage_name
        self.logger = logger or logging.getLogger(self.__class__.__name__)
        self._stage_start_time: Optional[datetime] = None

    @abstractmethod
    def run(self, **kwargs) -> StageResult:
        """Execute the stage."""
        raise NotImplementedError("Subclasses must implement run()")

    def _start_stage(self) -> None:
        """Mark the start of a stage run."""
        self._stage_start_time = datetime.now()
        self.logger.info(f"Starting stage {self.stage_name}")

    def _log_stage_summary(self, result: StageResult) -> None:
        """
        Log a summary of the stage results.

        Args:
            result: Result container filled by the stage
        """
        self.logger.info("=" * 60)
        self.logger.info(f"{self.stage_name.upper()} SUMMARY")
        self.logger.info("=" * 60)

        for name, path in result.artifacts.items():
            self.logger.info(f"  {name}: {result.row_counts.get(name, 0):,} rows -> {path}")

        for name, value in result.values.items():
            self.logger.info(f"  {name}: {value}")

        for name, message in result.errors.items():
            self.logger.warning(f"  error in {name}: {message}")

        self.logger.info("-" * 60)
        self.logger.info(f"Total rows: {result.total_rows:,}")

        if self._stage_start_time:
            duration = datetime.now() - self._stage_start_time
            self.logger.info(f"Duration: {duration}")

        self.logger.info("=" * 60)
