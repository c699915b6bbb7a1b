"""Tests for pipeline jobs and the job scheduler."""

import pytest

from core.base import StageResult
from core.config import ConfigurationError
from scheduler.jobs import JobConfig, PipelineJob
from scheduler.runner import JobScheduler


def ok_result(rows: int = 3) -> StageResult:
    result = StageResult("gen-data")
    result.add_artifact("episodes", "episodes.jsonl", row_count=rows)
    return result


class TestPipelineJob:
    """Tests for PipelineJob.execute."""

    def test_success(self):
        run = PipelineJob(JobConfig(name="gen-data"), ok_result).execute()
        assert run.success
        assert run.rows_written == 3
        assert run.artifacts == {"episodes": "episodes.jsonl"}
        assert run.to_dict()["duration_seconds"] is not None

    def test_failure_is_captured(self):
        def boom():
            raise ConfigurationError(message="bad config", fix="fix it")

        run = PipelineJob(JobConfig(name="train"), boom).execute()
        assert not run.success
        assert isinstance(run.error, ConfigurationError)
        assert "bad config" in run.error_message

    def test_stage_errors_fail_the_run(self):
        def partial():
            result = ok_result()
            result.add_error("traces", "conservation violated")
            return result

        run = PipelineJob(JobConfig(name="analyze"), partial).execute()
        assert not run.success
        assert run.error_message == "traces: conservation violated"

    def test_retries_only_configured_errors(self):
        calls = []

        def flaky():
            calls.append(1)
            if len(calls) < 3:
                raise OSError("disk busy")
            return ok_result()

        run = PipelineJob(JobConfig(name="run", retry_count=3, retry_on=(OSError,)), flaky).execute()
        assert run.success
        assert run.retry_attempt == 2

        calls.clear()
        run = PipelineJob(JobConfig(name="run", retry_count=3), flaky).execute()
        assert not run.success
        assert len(calls) == 1

    def test_disabled(self):
        job = PipelineJob(JobConfig(name="report", enabled=False), ok_result)
        assert not job.execute().success
        assert job.execute(force=True).success


class TestJobScheduler:
    """Tests for JobScheduler."""

    def test_invalid_workers(self):
        with pytest.raises(ValueError):
            JobScheduler(max_workers=0)

    @pytest.mark.parametrize("workers", [1, 4])
    def test_map_keeps_order(self, workers):
        assert JobScheduler(max_workers=workers).map(lambda x: x * x, range(20)) == [x * x for x in range(20)]

    def test_jobs_and_status(self):
        scheduler = JobScheduler()
        scheduler.add_job(PipelineJob(JobConfig(name="gen-data"), ok_result))
        assert scheduler.run_job("missing") is None
        assert scheduler.run_job("gen-data").success
        status = scheduler.get_job_status()
        assert status["gen-data"]["run_count"] == 1
        assert [r.success for r in scheduler.run_all_jobs()] == [True]
