"""Tests for episode metrics."""

import pandas as pd
import pytest

from agent.actions import ToolCall
from analysis.metrics import (
    episode_metrics,
    episodes_frame,
    histogram_frame,
    metrics_by_regime,
    percent,
    redundant_calls,
    seeker_distribution,
)


# ============================================
# Golden Fixtures
# ============================================


class TestGoldenRows:
    """Hand-built logs with known aggregate values."""

    def test_invalid_rate_seven_of_110(self, make_record):
        records = [make_record(task_id=f"t{i}", invalid=i < 7) for i in range(110)]
        report = episode_metrics(records)
        assert report.invalid_action_rate == pytest.approx(7 / 110)
        assert report.invalid_action_rate_pct == 6.4

    def test_ar_row(self, make_record):
        tool_calls = [7, 8] * 5
        turns = [15] * 8 + [14] * 2
        records = [
            make_record(task_id=f"t{i}", regime="ar", tool_calls=c, turns=t)
            for i, (c, t) in enumerate(zip(tool_calls, turns))
        ]
        report = episode_metrics(records)
        assert report.regime == "ar"
        assert report.mean_tool_calls == pytest.approx(7.5)
        assert report.mean_turns == pytest.approx(14.8)
        assert report.accuracy == 1.0

    def test_diffusion_row(self, make_record):
        tool_calls = [7] * 7 + [6] * 3
        records = [make_record(task_id=f"t{i}", tool_calls=c, turns=13) for i, c in enumerate(tool_calls)]
        report = episode_metrics(records)
        assert report.mean_tool_calls == pytest.approx(6.7)
        assert report.mean_turns == pytest.approx(13.0)

    @pytest.mark.parametrize("seekers, mean", [([8, 8, 8], 8.0), ([10, 10, 11, 10, 11], 10.4)])
    def test_seeker_means(self, make_record, seekers, mean):
        records = [make_record(task_id=f"t{i}", tool_calls=12, seeker_calls=s) for i, s in enumerate(seekers)]
        histogram, observed = seeker_distribution(records)
        assert observed == pytest.approx(mean)
        assert sum(histogram.values()) == len(seekers)
        assert episode_metrics(records).mean_seeker_calls == pytest.approx(mean)

    def test_seeker_histogram(self, make_record):
        records = [make_record(task_id=f"t{i}", tool_calls=12, seeker_calls=s) for i, s in enumerate([10, 10, 11, 10, 11])]
        histogram, _ = seeker_distribution(records)
        assert histogram == {10: 3, 11: 2}


# ============================================
# Operations
# ============================================


class TestPercent:
    """Tests for percent."""

    @pytest.mark.parametrize("fraction, expected", [(7 / 110, 6.4), (0.0, 0.0), (1.0, 100.0), (1 / 3, 33.3)])
    def test_rounding(self, fraction, expected):
        assert percent(fraction) == expected


class TestEpisodeMetrics:
    """Tests for episode_metrics."""

    def test_empty(self):
        with pytest.raises(ValueError):
            episode_metrics([])

    def test_mixed_regimes(self, make_record):
        with pytest.raises(ValueError):
            episode_metrics([make_record(regime="ar"), make_record(regime="diffusion")])

    def test_correct_conditioned_means(self, make_record):
        records = [
            make_record(task_id="a", tool_calls=2, turns=3),
            make_record(task_id="b", tool_calls=4, turns=9, correct=False),
        ]
        report = episode_metrics(records)
        assert report.accuracy == 0.5
        assert report.correct_mean_turns == 3.0
        assert report.correct_mean_tool_calls == 2.0
        assert report.mean_turns == 6.0

    def test_no_correct_episodes(self, make_record):
        report = episode_metrics([make_record(correct=False)])
        assert report.correct_mean_turns is None
        frame = report.to_frame()
        assert frame["correct_mean_turns"].isna().all()

    def test_to_dict_omits_wall_clock(self, make_record):
        report = episode_metrics([make_record()])
        assert "wall_clock_total" not in report.to_dict()
        assert list(report.to_frame().columns) == list(report.to_dict())

    def test_cognitive_calls_count_as_tool_calls(self, make_record):
        record = make_record(tool_calls=5, seeker_calls=2)
        assert record.tool_calls == 5
        assert record.seeker_calls == 2


class TestRedundantCalls:
    """Tests for redundant_calls."""

    def test_distinct_calls(self, make_record):
        # queries p=0, p=1, ... differ
        assert redundant_calls(make_record(tool_calls=4)) == 0

    def test_repeats(self, make_record):
        record = make_record(tool_calls=3)
        repeat = ToolCall("batch_web_search", {"query": "p=0"}).to_dict()
        record.rounds[1].action = repeat
        record.rounds[2].action = repeat
        assert redundant_calls(record) == 2
        assert episode_metrics([record]).redundant_call_rate == pytest.approx(2 / 3)

    def test_unexecuted_rounds_ignored(self, make_record):
        # filler think rounds repeat each other but never ran
        assert redundant_calls(make_record(tool_calls=1, turns=8)) == 0


class TestTables:
    """Tests for episodes_frame, histogram_frame and metrics_by_regime."""

    def test_episodes_frame(self, make_record):
        df = episodes_frame([make_record(task_id="x", tool_calls=2, invalid=True)])
        row = df.iloc[0]
        assert row["task_id"] == "x"
        assert row["turns"] == 4
        assert bool(row["has_invalid"])
        assert row["outcome"] == "AnsweredCorrect"

    def test_histogram_frame(self):
        df = histogram_frame({11: 2, 10: 3}, "ar")
        expected = pd.DataFrame({"regime": ["ar", "ar"], "seeker_calls": [10, 11], "episodes": [3, 2]})
        pd.testing.assert_frame_equal(df, expected)

    def test_metrics_by_regime(self, make_record):
        records = [make_record(regime="ar"), make_record(regime="diffusion", correct=False), make_record(regime="ar")]
        reports = metrics_by_regime(records)
        assert list(reports) == ["ar", "diffusion"]
        assert reports["ar"].n_episodes == 2
        assert reports["diffusion"].accuracy == 0.0
