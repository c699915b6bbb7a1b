"""
Job Runner for dllm_agent_lab

This module provides the scheduler that executes pipeline jobs and fans
independent work items (episodes) out over a worker pool.

Features:
- Register and run pipeline jobs by name
- Parallel map over independent items with results in submission order
- Job history and status reporting

Usage:
    from scheduler.runner import JobScheduler

    scheduler = JobScheduler(max_workers=4)
    results = scheduler.map(run_one_episode, tasks, name="episodes")
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Iterable, List, Optional, TypeVar

from scheduler.jobs import JobRun, PipelineJob


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class JobScheduler:
    """
    Runs registered pipeline jobs and parallel work items.

    Work items share no mutable state, so the merge order (submission
    order) is the only thing that makes parallel output deterministic.
    """

    def __init__(self, max_workers: int = 1):
        """
        Initialize the scheduler.

        Args:
            max_workers: Worker threads for map(); 1 runs inline
        """
        if max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {max_workers}")
        self.max_workers = max_workers
        self.jobs: Dict[str, PipelineJob] = {}

    def add_job(self, job: PipelineJob) -> None:
        """
        Add a job to the scheduler.

        Args:
            job: PipelineJob to add
        """
        self.jobs[job.config.name] = job
        logger.debug(f"Added job: {job.config.name}")

    def run_job(self, job_name: str, force: bool = False) -> Optional[JobRun]:
        """
        Run a specific job immediately.

        Args:
            job_name: Name of the job to run
            force: Run even if job is disabled

        Returns:
            JobRun record, or None if job not found
        """
        if job_name not in self.jobs:
            logger.error(f"Job not found: {job_name}")
            return None
        return self.jobs[job_name].execute(force=force)

    def run_all_jobs(self, force: bool = False) -> List[JobRun]:
        """Run all registered jobs in registration order."""
        return [job.execute(force=force) for job in self.jobs.values()]

    def map(self, func: Callable[[T], R], items: Iterable[T], name: str = "work") -> List[R]:
        """
        Apply func to every item, in parallel when max_workers > 1.

        Args:
            func: Work function (must not share mutable state across items)
            items: Work items
            name: Label for log messages

        Returns:
            Results in the order the items were given
        """
        items = list(items)
        logger.info(f"Running {len(items):,} {name} with {self.max_workers} worker(s)")
        if self.max_workers == 1 or len(items) <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(func, items))

    def get_job_status(self) -> Dict[str, dict]:
        """
        Get status of all jobs.

        Returns:
            Dictionary mapping job names to status info
        """
        return {
            name: {
                'enabled': job.config.enabled,
                'last_run': job.last_run.to_dict() if job.last_run else None,
                'run_count': len(job.run_history),
            }
            for name, job in self.jobs.items()
        }
