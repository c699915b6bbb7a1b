"""
Analysis Module for dllm_agent_lab

This module turns run logs into the numbers the lab compares:
- Episode metrics (accuracy, tool calls, turns, invalid action rate)
- Seeker-call distributions
- Decoding dynamics (decode order, entropy, remaining masks, confidence)
- Regime comparison tables
- A DuckDB warehouse for SQL access across runs

Submodules:
- metrics: episode-level aggregation
- dynamics: decode-trace aggregation
- validation: JSONL schema checks and loaders
- report: side-by-side regime table
- warehouse: DuckDB upserts

Usage:
    from analysis import episode_metrics, decode_dynamics, load_traces

    report = episode_metrics(records)
    dynamics = decode_dynamics(load_traces("runs/dllm/traces.jsonl"))
"""

from analysis.dynamics import DynamicsReport, decode_dynamics
from analysis.metrics import MetricsReport, episode_metrics, seeker_distribution
from analysis.report import compare_runs
from analysis.validation import load_episode_records, load_traces

__all__ = [
    'DynamicsReport',
    'MetricsReport',
    'compare_runs',
    'decode_dynamics',
    'episode_metrics',
    'load_episode_records',
    'load_traces',
    'seeker_distribution',
]
