"""
Regime Comparison Report for dllm_agent_lab

Builds the side-by-side table of two or more run directories: the
workflow-efficiency columns (Accuracy, Tool Calls, Turns Used, Invalid
Action Rate) followed by decoding latency proxies.

Step reduction and wall-clock speedup are computed against the AR run
when one is present; wall-clock is hardware-dependent and only reported.

Usage:
    from analysis.report import compare_runs, format_table

    table = compare_runs(["runs/ar", "runs/dllm"])
    print(format_table(table))
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from analysis.dynamics import latency_proxies
from analysis.metrics import episode_metrics
from analysis.validation import load_episode_records, load_traces
from core.config import ConfigurationError
from core.utils import canonical_json


logger = logging.getLogger(__name__)

EFFICIENCY_COLUMNS = ["Accuracy", "Tool Calls", "Turns Used", "Invalid Action Rate"]
LATENCY_COLUMNS = ["Seeker Calls", "Steps/Action", "Tokens/Step", "Step Reduction vs AR (%)", "Wall-clock Speedup"]

EPISODES_FILE = "episodes.jsonl"
TRACES_FILE = "traces.jsonl"


def summarize_run(run_dir: Union[str, Path]) -> Dict:
    """
    One comparison row for a run directory.

    Raises:
        ConfigurationError: When the directory has no episodes.jsonl
    """
    run_dir = Path(run_dir)
    episodes_path = run_dir / EPISODES_FILE
    if not episodes_path.is_file():
        raise ConfigurationError(
            message=f"No {EPISODES_FILE} in {run_dir}",
            fix="Pass directories written by the 'run' subcommand to --compare"
        )

    records = load_episode_records(episodes_path)
    report = episode_metrics(records)
    traces_path = run_dir / TRACES_FILE
    traces = load_traces(traces_path) if traces_path.is_file() else []
    latency = latency_proxies(traces)

    budgets = {canonical_json(r.budget) for r in records}
    return {
        "Run": run_dir.name,
        "Regime": report.regime,
        "Episodes": report.n_episodes,
        "Accuracy": report.accuracy_pct,
        "Tool Calls": round(report.mean_tool_calls, 2),
        "Turns Used": round(report.mean_turns, 2),
        "Invalid Action Rate": report.invalid_action_rate_pct,
        "Seeker Calls": round(report.mean_seeker_calls, 2),
        "Steps/Action": latency.get("mean_steps_per_action", np.nan),
        "Tokens/Step": latency.get("mean_tokens_per_step", np.nan),
        "_wall_per_action": latency.get("wall_clock_total", np.nan) / max(len(traces), 1),
        "_budgets": budgets,
    }


def compare_runs(run_dirs: Sequence[Union[str, Path]]) -> pd.DataFrame:
    """
    Side-by-side regime table.

    Args:
        run_dirs: Two or more run directories

    Returns:
        DataFrame with Run, Regime, Episodes, the efficiency columns and the
        latency columns

    Raises:
        ConfigurationError: With fewer than two runs
    """
    if len(run_dirs) < 2:
        raise ConfigurationError(message="report --compare needs at least two run directories",
                                 fix="Example: report --compare runs/ar runs/dllm")

    rows: List[Dict] = [summarize_run(d) for d in run_dirs]
    if len(set().union(*(r["_budgets"] for r in rows))) > 1:
        logger.warning("Runs were executed under different budgets; the comparison is not symmetric")

    df = pd.DataFrame(rows)
    ar = df[df["Regime"] == "ar"]
    if not ar.empty:
        ar_steps = float(ar["Steps/Action"].iloc[0])
        ar_wall = float(ar["_wall_per_action"].iloc[0])
        df["Step Reduction vs AR (%)"] = (100.0 * (1.0 - df["Steps/Action"] / ar_steps)).round(1)
        df["Wall-clock Speedup"] = (ar_wall / df["_wall_per_action"]).round(2)
    else:
        df["Step Reduction vs AR (%)"] = np.nan
        df["Wall-clock Speedup"] = np.nan

    df["Steps/Action"] = df["Steps/Action"].round(2)
    df["Tokens/Step"] = df["Tokens/Step"].round(2)
    return df[["Run", "Regime", "Episodes"] + EFFICIENCY_COLUMNS + LATENCY_COLUMNS]


def format_table(df: pd.DataFrame) -> str:
    """Plain-text rendering for the console."""
    return df.to_string(index=False, na_rep="-")
