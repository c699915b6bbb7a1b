"""
Pipeline Job Definitions for dllm_agent_lab

This module wraps pipeline stages (gen-data, train, run, analyze, report)
as jobs with run records, so every CLI invocation leaves the same kind of
execution trail regardless of which stage it ran.

Features:
- Job configuration with optional retries
- JobRun records with timing, row counts and artifacts
- Failures captured as records instead of tracebacks

Usage:
    from scheduler.jobs import JobConfig, PipelineJob

    job = PipelineJob(JobConfig(name="train"), lambda: stage.run(**kwargs))
    run = job.execute()
    if not run.success:
        print(run.error_message)
"""

import logging
from dataclasses import dataclass, fields
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional

from core.base import StageResult


logger = logging.getLogger(__name__)


@dataclass
class JobConfig:
    """
    Configuration for a pipeline job.

    Attributes:
        name: Unique job identifier (usually the subcommand)
        enabled: Whether the job may run
        retry_count: Extra attempts after a failure
        retry_on: Exception types worth retrying (deterministic stages
                  never are, so the default is none)
    """
    name: str
    enabled: bool = True
    retry_count: int = 0
    retry_on: tuple = ()


@dataclass
class JobRun:
    """
    One attempt at a stage.

    Rows and artifacts are read through from the StageResult, so a run that
    raised before producing one reports none.
    """
    job_name: str
    started_at: datetime
    completed_at: Optional[datetime] = None
    success: bool = False
    error_message: Optional[str] = None
    error: Optional[BaseException] = None
    retry_attempt: int = 0
    result: Optional[StageResult] = None

    @property
    def rows_written(self) -> int:
        return self.result.total_rows if self.result else 0

    @property
    def artifacts(self) -> Dict[str, str]:
        return dict(self.result.artifacts) if self.result else {}

    @property
    def duration_seconds(self) -> Optional[float]:
        if self.completed_at is None:
            return None
        return (self.completed_at - self.started_at).total_seconds()

    def to_dict(self) -> Dict[str, Any]:
        record = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("error", "result")}
        for key in ("started_at", "completed_at"):
            record[key] = record[key].isoformat() if record[key] else None
        record.update(
            rows_written=self.rows_written,
            artifacts=self.artifacts,
            duration_seconds=self.duration_seconds,
        )
        return record


class PipelineJob:
    """
    Executable pipeline job with optional retries.

    Wraps a zero-argument callable returning a StageResult and turns its
    outcome (or exception) into a JobRun.
    """

    def __init__(self, config: JobConfig, func: Callable[[], StageResult]):
        """
        Initialize a pipeline job.

        Args:
            config: Job configuration
            func: Stage entry point
        """
        self.config = config
        self.func = func
        self.last_run: Optional[JobRun] = None
        self.run_history: List[JobRun] = []
        self.logger = logging.getLogger(f"job.{config.name}")

    def execute(self, force: bool = False) -> JobRun:
        """
        Execute the job, retrying only on the configured exception types.

        Args:
            force: If True, run even if disabled

        Returns:
            JobRun record
        """
        if not self.config.enabled and not force:
            self.logger.warning(f"Job {self.config.name} is disabled")
            return JobRun(
                job_name=self.config.name,
                started_at=datetime.now(),
                completed_at=datetime.now(),
                success=False,
                error_message="Job is disabled"
            )

        attempt = 0
        while True:
            run = self._execute_attempt(attempt)
            retryable = run.error is not None and isinstance(run.error, self.config.retry_on)
            if run.success or not retryable or attempt >= self.config.retry_count:
                break
            attempt += 1
            self.logger.warning(
                f"Job {self.config.name} failed, retrying "
                f"(attempt {attempt}/{self.config.retry_count})"
            )

        self.last_run = run
        self.run_history.append(run)
        return run

    def _execute_attempt(self, attempt: int) -> JobRun:
        run = JobRun(
            job_name=self.config.name,
            started_at=datetime.now(),
            retry_attempt=attempt
        )

        self.logger.info(f"Starting job {self.config.name} (attempt {attempt + 1})")

        try:
            result = self.func()
            run.completed_at = datetime.now()
            run.result = result
            run.success = result.success
            if result.success:
                self.logger.info(
                    f"Job {self.config.name} completed: "
                    f"{run.rows_written:,} rows, {len(run.artifacts)} artifacts"
                )
            else:
                run.error_message = "; ".join(f"{k}: {v}" for k, v in result.errors.items())
        except Exception as e:
            run.completed_at = datetime.now()
            run.success = False
            run.error = e
            run.error_message = str(e)
            self.logger.error(f"Job {self.config.name} failed: {e}")

        return run
