"""
Episode Metrics for dllm_agent_lab

Workflow-efficiency metrics over EpisodeRecords of a single regime:
accuracy, mean tool calls, mean turns, invalid action rate and the
distribution of information-seeker calls per episode.

Definitions:
- accuracy: fraction of episodes ending AnsweredCorrect
- invalid_action_rate: fraction of episodes with at least one unparsable span
- redundant_call_rate: fraction of executed ToolCalls that repeat an earlier
  identical ToolCall in the same episode
- correct_mean_*: means restricted to AnsweredCorrect episodes

Usage:
    from analysis.metrics import episode_metrics, seeker_distribution

    report = episode_metrics(records)
    print(report.accuracy_pct, report.invalid_action_rate_pct)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from agent.actions import ToolCall, action_from_dict
from agent.runtime import EpisodeRecord, Outcome


logger = logging.getLogger(__name__)


def percent(fraction: float) -> float:
    """Fraction -> percent rounded to one decimal (7/110 -> 6.4)."""
    return round(100.0 * fraction, 1)


@dataclass
class MetricsReport:
    """
    Aggregate metrics of one regime.

    Attributes:
        regime: Regime all episodes ran under
        n_episodes: Episode count
        accuracy: Fraction AnsweredCorrect
        mean_tool_calls: Mean executed ToolCalls per episode
        mean_turns: Mean rounds per episode
        invalid_action_rate: Fraction of episodes with >= 1 unparsable span
        seeker_call_histogram: Seeker-call count -> number of episodes
        mean_seeker_calls: Mean seeker calls per episode
        redundant_call_rate: Fraction of executed ToolCalls repeating an earlier one
        correct_mean_turns: Mean turns over correct episodes (None if there are none)
        correct_mean_tool_calls: Mean tool calls over correct episodes
        fallback_rate: Fraction of Fallback or BudgetExhausted episodes
        fallback_correct_rate: Fraction whose fallback answer was right
        wall_clock_total: Seconds spent across all rounds (kept out of to_dict:
                          it differs between otherwise identical runs)
    """
    regime: str
    n_episodes: int
    accuracy: float
    mean_tool_calls: float
    mean_turns: float
    invalid_action_rate: float
    seeker_call_histogram: Dict[int, int] = field(default_factory=dict)
    mean_seeker_calls: float = 0.0
    redundant_call_rate: float = 0.0
    correct_mean_turns: Optional[float] = None
    correct_mean_tool_calls: Optional[float] = None
    fallback_rate: float = 0.0
    fallback_correct_rate: float = 0.0
    wall_clock_total: float = 0.0

    @property
    def accuracy_pct(self) -> float:
        return percent(self.accuracy)

    @property
    def invalid_action_rate_pct(self) -> float:
        return percent(self.invalid_action_rate)

    def to_dict(self) -> Dict:
        return {
            "regime": self.regime,
            "n_episodes": self.n_episodes,
            "accuracy": self.accuracy,
            "accuracy_pct": self.accuracy_pct,
            "mean_tool_calls": self.mean_tool_calls,
            "mean_turns": self.mean_turns,
            "invalid_action_rate": self.invalid_action_rate,
            "invalid_action_rate_pct": self.invalid_action_rate_pct,
            "mean_seeker_calls": self.mean_seeker_calls,
            "redundant_call_rate": self.redundant_call_rate,
            "correct_mean_turns": self.correct_mean_turns,
            "correct_mean_tool_calls": self.correct_mean_tool_calls,
            "fallback_rate": self.fallback_rate,
            "fallback_correct_rate": self.fallback_correct_rate,
        }

    def to_frame(self) -> pd.DataFrame:
        """One-row frame, the row written to metrics.csv."""
        frame = pd.DataFrame([self.to_dict()])
        return frame.astype({"correct_mean_turns": "float64", "correct_mean_tool_calls": "float64"})


# ============================================
# Per-Episode Tables
# ============================================


def episodes_frame(records: Sequence[EpisodeRecord]) -> pd.DataFrame:
    """
    One row per episode with the counts every metric is built from.

    Columns: regime, task_id, outcome, correct, turns, tool_calls,
    seeker_calls, has_invalid, redundant_calls, fallback, fallback_correct,
    wall_clock.
    """
    rows = []
    for r in records:
        rows.append({
            "regime": r.regime,
            "task_id": r.task_id,
            "outcome": r.outcome.value,
            "answer": r.answer,
            "gold_answer": r.gold_answer,
            "correct": r.correct,
            "turns": r.turns,
            "tool_calls": r.tool_calls,
            "seeker_calls": r.seeker_calls,
            "has_invalid": r.has_invalid,
            "redundant_calls": redundant_calls(r),
            "fallback": r.outcome in (Outcome.FALLBACK, Outcome.BUDGET_EXHAUSTED),
            "fallback_correct": r.fallback_correct,
            "fallback_reason": r.fallback_reason,
            "wall_clock": float(sum(rnd.wall_clock for rnd in r.rounds)),
        })
    return pd.DataFrame(rows)


def redundant_calls(record: EpisodeRecord) -> int:
    """Executed ToolCalls that exactly repeat an earlier ToolCall of the episode."""
    seen: set = set()
    repeats = 0
    for rnd in record.rounds:
        if not rnd.executed:
            continue
        action = action_from_dict(rnd.action)
        if not isinstance(action, ToolCall):
            continue
        key = action.key()
        if key in seen:
            repeats += 1
        seen.add(key)
    return repeats


# ============================================
# Operations
# ============================================


def _single_regime(records: Sequence[EpisodeRecord]) -> str:
    if not records:
        raise ValueError("episode_metrics needs at least one episode")
    regimes = sorted({r.regime for r in records})
    if len(regimes) > 1:
        raise ValueError(f"Mixed regimes in one metrics call: {', '.join(regimes)}")
    return regimes[0]


def seeker_distribution(records: Sequence[EpisodeRecord]) -> Tuple[Dict[int, int], float]:
    """
    Histogram of seeker calls per episode.

    Args:
        records: Episodes (any regime)

    Returns:
        (count -> number of episodes, mean count); ({}, 0.0) for no episodes
    """
    counts = pd.Series([r.seeker_calls for r in records], dtype="int64")
    if counts.empty:
        return {}, 0.0
    histogram = {int(k): int(v) for k, v in counts.value_counts().sort_index().items()}
    return histogram, float(counts.mean())


def episode_metrics(records: Sequence[EpisodeRecord]) -> MetricsReport:
    """
    Aggregate workflow metrics of one regime.

    Args:
        records: Non-empty episodes, all from the same regime

    Returns:
        MetricsReport

    Raises:
        ValueError: On empty or mixed-regime input
    """
    regime = _single_regime(records)
    df = episodes_frame(records)
    histogram, mean_seekers = seeker_distribution(records)

    total_calls = int(df["tool_calls"].sum())
    correct = df[df["correct"]]

    report = MetricsReport(
        regime=regime,
        n_episodes=len(df),
        accuracy=float(df["correct"].mean()),
        mean_tool_calls=float(df["tool_calls"].mean()),
        mean_turns=float(df["turns"].mean()),
        invalid_action_rate=float(df["has_invalid"].mean()),
        seeker_call_histogram=histogram,
        mean_seeker_calls=mean_seekers,
        redundant_call_rate=float(df["redundant_calls"].sum() / total_calls) if total_calls else 0.0,
        correct_mean_turns=float(correct["turns"].mean()) if len(correct) else None,
        correct_mean_tool_calls=float(correct["tool_calls"].mean()) if len(correct) else None,
        fallback_rate=float(df["fallback"].mean()),
        fallback_correct_rate=float(df["fallback_correct"].mean()),
        wall_clock_total=float(df["wall_clock"].sum()),
    )
    logger.info(
        f"[{regime}] {report.n_episodes} episodes: accuracy {report.accuracy_pct}%, "
        f"tool calls {report.mean_tool_calls:.2f}, turns {report.mean_turns:.2f}, "
        f"invalid {report.invalid_action_rate_pct}%"
    )
    return report


def metrics_by_regime(records: Sequence[EpisodeRecord]) -> Dict[str, MetricsReport]:
    """Split a mixed log by regime and report each part."""
    grouped: Dict[str, List[EpisodeRecord]] = {}
    for r in records:
        grouped.setdefault(r.regime, []).append(r)
    return {regime: episode_metrics(group) for regime, group in sorted(grouped.items())}


def histogram_frame(histogram: Dict[int, int], regime: str) -> pd.DataFrame:
    """Histogram as rows (regime, seeker_calls, episodes) for seeker_histogram.csv."""
    keys = sorted(histogram)
    return pd.DataFrame({
        "regime": [regime] * len(keys),
        "seeker_calls": np.asarray(keys, dtype=np.int64),
        "episodes": [histogram[k] for k in keys],
    })
