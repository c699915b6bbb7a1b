"""Tests for the regime comparison report."""

import pytest

from analysis.report import EFFICIENCY_COLUMNS, LATENCY_COLUMNS, compare_runs, format_table, summarize_run
from core.config import ConfigurationError
from core.utils import write_jsonl
from diffusion.decoding import DecodeStep, DecodeTrace


def trace(regime: str, task_id: str, commits) -> DecodeTrace:
    """Single-block trace committing `commits[i]` positions at step i + 1."""
    span_len = sum(commits)
    steps, start = [], 0
    for i, n in enumerate(commits):
        masked = list(range(start, span_len))
        steps.append(DecodeStep(
            block=0, step=i + 1, positions=list(range(start, start + n)), tokens=["a"] * n,
            confidences=[0.9] * n, masked_positions=masked, masked_confidences=[0.9] * len(masked),
            masked_entropies=[0.1] * len(masked), remaining=len(masked), wall_clock=0.01 * n,
        ))
        start += n
    return DecodeTrace(f"{regime}:{task_id}:0:0", regime, "planner", span_len, 64, steps,
                       span_len=span_len, forward_passes=len(commits))


def write_run(run_dir, records, traces):
    write_jsonl(run_dir / "episodes.jsonl", [r.to_dict() for r in records])
    write_jsonl(run_dir / "traces.jsonl", [row for t in traces for row in t.records()])
    return run_dir


@pytest.fixture
def runs(tmp_path, make_record):
    ar = write_run(
        tmp_path / "ar",
        [make_record(task_id="t0", regime="ar", tool_calls=3), make_record(task_id="t1", regime="ar", tool_calls=5)],
        [trace("ar", "t0", [1] * 8), trace("ar", "t1", [1] * 8)],
    )
    dllm = write_run(
        tmp_path / "dllm",
        [make_record(task_id="t0", tool_calls=2), make_record(task_id="t1", tool_calls=2, correct=False)],
        [trace("diffusion", "t0", [4, 2, 2]), trace("diffusion", "t1", [6, 2])],
    )
    return ar, dllm


class TestSummarizeRun:
    """Tests for summarize_run."""

    def test_row(self, runs):
        row = summarize_run(runs[1])
        assert row["Run"] == "dllm"
        assert row["Regime"] == "diffusion"
        assert row["Accuracy"] == 50.0
        assert row["Tool Calls"] == 2.0
        assert row["Steps/Action"] == pytest.approx(2.5)
        assert row["Tokens/Step"] == pytest.approx(16 / 5)

    def test_missing_episodes(self, tmp_path):
        with pytest.raises(ConfigurationError):
            summarize_run(tmp_path)


class TestCompareRuns:
    """Tests for compare_runs."""

    def test_columns(self, runs):
        table = compare_runs(list(runs))
        assert list(table.columns) == ["Run", "Regime", "Episodes"] + EFFICIENCY_COLUMNS + LATENCY_COLUMNS
        assert table["Regime"].tolist() == ["ar", "diffusion"]

    def test_step_reduction(self, runs):
        table = compare_runs(list(runs)).set_index("Regime")
        assert table.loc["ar", "Step Reduction vs AR (%)"] == 0.0
        # 2.5 steps per action against 8
        assert table.loc["diffusion", "Step Reduction vs AR (%)"] == pytest.approx(68.8)
        assert table.loc["ar", "Tool Calls"] == 4.0

    def test_needs_two_runs(self, runs):
        with pytest.raises(ConfigurationError):
            compare_runs([runs[0]])

    def test_format_table(self, runs):
        text = format_table(compare_runs(list(runs)))
        assert "Invalid Action Rate" in text
        assert "dllm" in text
