"""
Scheduler Module for dllm_agent_lab

This module provides job execution for the lab pipeline:
- Pipeline stages wrapped as jobs with run records
- Parallel, order-preserving execution of independent episodes

Usage:
    from scheduler import JobConfig, JobScheduler, PipelineJob

    scheduler = JobScheduler(max_workers=4)
    scheduler.add_job(PipelineJob(JobConfig(name="train"), stage_fn))
    run = scheduler.run_job("train")
"""

from scheduler.jobs import JobConfig, JobRun, PipelineJob
from scheduler.runner import JobScheduler

__all__ = [
    'JobConfig',
    'JobRun',
    'JobScheduler',
    'PipelineJob',
]
