"""
Decoding Dynamics for dllm_agent_lab

Turns DecodeTraces into plot-ready tables:

- decode order: the step at which each position of each block was
  committed, plus the per-block relative order step / steps_in_block
- entropy series: mean entropy of the still-masked positions per step
- remaining-mask series: masked positions left in the block before each step
- tokens-per-step series: commits per step
- confidence -> decode probability: per-step P(commit | confidence bucket),
  buckets of width 0.1 over [0, 1] (1.0 falls in the top bucket)

All series are keyed by the one-based step index inside a block.

Usage:
    from analysis.dynamics import decode_dynamics

    report = decode_dynamics(traces, role="seeker")
    report.entropy_series.to_csv("dynamics_entropy.csv", index=False)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from diffusion.decoding import DecodeTrace


logger = logging.getLogger(__name__)

CONFIDENCE_BUCKETS = 10


# ============================================
# Per-Trace Helpers
# ============================================


def block_spans(trace: DecodeTrace) -> Dict[int, int]:
    """Block index -> number of action positions the block covers."""
    L = trace.block_len
    n_blocks = -(-trace.span_len // L) if trace.span_len else 0
    return {b: min(L, trace.span_len - b * L) for b in range(n_blocks)}


def decode_order(trace: DecodeTrace) -> Dict[int, List[int]]:
    """
    Block -> step index of each position, in position order.

    An AR trace gives the identity ordering [1, 2, ..., n] for every block.
    """
    L = trace.block_len
    order: Dict[int, Dict[int, int]] = {}
    for s in trace.steps:
        for p in s.positions:
            order.setdefault(s.block, {})[p - s.block * L] = s.step
    return {b: [cells[o] for o in sorted(cells)] for b, cells in sorted(order.items())}


def check_conservation(trace: DecodeTrace) -> List[str]:
    """
    Bookkeeping checks on one trace.

    - commits per block sum to the block's span length
    - remaining counts strictly decrease, reaching 0 after the last step
    - each position is committed exactly once

    Returns:
        Human-readable violations (empty when the trace is consistent)
    """
    problems: List[str] = []
    spans = block_spans(trace)
    committed: Dict[int, int] = {}
    for s in trace.steps:
        for p in s.positions:
            committed[p] = committed.get(p, 0) + 1
    doubles = sorted(p for p, n in committed.items() if n > 1)
    if doubles:
        problems.append(f"{trace.trace_id}: positions committed more than once: {doubles}")

    for b, span in spans.items():
        steps = [s for s in trace.steps if s.block == b]
        total = sum(len(s.positions) for s in steps)
        if total != span:
            problems.append(f"{trace.trace_id}: block {b} committed {total} of {span} positions")
        remaining = [s.remaining for s in steps]
        if any(later >= earlier for earlier, later in zip(remaining, remaining[1:])):
            problems.append(f"{trace.trace_id}: block {b} remaining counts not strictly decreasing: {remaining}")
        if steps and steps[-1].remaining - len(steps[-1].positions) != 0:
            problems.append(f"{trace.trace_id}: block {b} ends with masked positions left")
    return problems


def confidence_bucket(confidence: float) -> int:
    """Bucket index in [0, CONFIDENCE_BUCKETS); 1.0 goes to the top bucket."""
    return min(int(confidence * CONFIDENCE_BUCKETS), CONFIDENCE_BUCKETS - 1)


# ============================================
# Report
# ============================================


@dataclass
class DynamicsReport:
    """
    Plot-ready decoding-dynamics tables.

    Attributes:
        regimes: Regimes present in the traces
        role: Role filter applied (None = all roles)
        n_traces: Traces aggregated
        decode_order: Long table (trace_id, role, block, offset, step, relative_order)
        entropy_series: (step, mean_entropy, n_masked)
        remaining_mask_series: (trace_id, block, step, remaining)
        tokens_per_step_series: (trace_id, block, step, tokens)
        confidence_decode_probability: (bucket, lower, upper, masked, decoded, probability)
        latency: Portable latency proxies
    """
    regimes: List[str]
    role: Optional[str]
    n_traces: int
    decode_order: pd.DataFrame
    entropy_series: pd.DataFrame
    remaining_mask_series: pd.DataFrame
    tokens_per_step_series: pd.DataFrame
    confidence_decode_probability: pd.DataFrame
    latency: Dict[str, float] = field(default_factory=dict)

    def decode_order_matrix(self, relative: bool = False) -> pd.DataFrame:
        """
        Heatmap source: mean step (or relative order) per block and in-block offset.

        Rows are block indices, columns in-block offsets.
        """
        value = "relative_order" if relative else "step"
        if self.decode_order.empty:
            return pd.DataFrame()
        return self.decode_order.pivot_table(index="block", columns="offset", values=value, aggfunc="mean")

    def mean_remaining_by_step(self) -> pd.DataFrame:
        if self.remaining_mask_series.empty:
            return pd.DataFrame(columns=["step", "mean_remaining"])
        return (
            self.remaining_mask_series.groupby("step", as_index=False)["remaining"]
            .mean()
            .rename(columns={"remaining": "mean_remaining"})
        )

    @property
    def mean_tokens_per_step(self) -> float:
        return self.latency.get("mean_tokens_per_step", float("nan"))


def decode_dynamics(traces: Sequence[DecodeTrace], role: Optional[str] = None) -> DynamicsReport:
    """
    Aggregate decode traces.

    Args:
        traces: Validated traces (see analysis.validation.load_traces)
        role: Keep only traces of this acting role ('planner' / 'seeker')

    Returns:
        DynamicsReport
    """
    selected = [t for t in traces if role is None or t.role == role]

    order_rows, tps_rows, rem_rows, ent_rows = [], [], [], []
    bucket_masked = np.zeros(CONFIDENCE_BUCKETS, dtype=np.int64)
    bucket_decoded = np.zeros(CONFIDENCE_BUCKETS, dtype=np.int64)

    for t in selected:
        steps_in_block: Dict[int, int] = {}
        for s in t.steps:
            steps_in_block[s.block] = max(steps_in_block.get(s.block, 0), s.step)
        for b, steps in decode_order(t).items():
            for offset, step in enumerate(steps):
                order_rows.append({
                    "trace_id": t.trace_id,
                    "role": t.role,
                    "block": b,
                    "offset": offset,
                    "step": step,
                    "relative_order": step / steps_in_block[b],
                })
        for s in t.steps:
            tps_rows.append({"trace_id": t.trace_id, "block": s.block, "step": s.step, "tokens": len(s.positions)})
            rem_rows.append({"trace_id": t.trace_id, "block": s.block, "step": s.step, "remaining": s.remaining})
            ent_rows.extend({"step": s.step, "entropy": e} for e in s.masked_entropies)
            chosen = set(s.positions)
            for p, c in zip(s.masked_positions, s.masked_confidences):
                k = confidence_bucket(c)
                bucket_masked[k] += 1
                bucket_decoded[k] += p in chosen

    order_df = pd.DataFrame(order_rows, columns=["trace_id", "role", "block", "offset", "step", "relative_order"])
    tps_df = pd.DataFrame(tps_rows, columns=["trace_id", "block", "step", "tokens"])
    rem_df = pd.DataFrame(rem_rows, columns=["trace_id", "block", "step", "remaining"])

    ent_df = pd.DataFrame(ent_rows, columns=["step", "entropy"])
    entropy_series = (
        ent_df.groupby("step")["entropy"].agg(mean_entropy="mean", n_masked="count").reset_index()
        if not ent_df.empty else pd.DataFrame(columns=["step", "mean_entropy", "n_masked"])
    )

    with np.errstate(invalid="ignore", divide="ignore"):
        probability = np.where(bucket_masked > 0, bucket_decoded / np.maximum(bucket_masked, 1), np.nan)
    conf_df = pd.DataFrame({
        "bucket": np.arange(CONFIDENCE_BUCKETS),
        "lower": np.arange(CONFIDENCE_BUCKETS) / CONFIDENCE_BUCKETS,
        "upper": (np.arange(CONFIDENCE_BUCKETS) + 1) / CONFIDENCE_BUCKETS,
        "masked": bucket_masked,
        "decoded": bucket_decoded,
        "probability": probability,
    })

    report = DynamicsReport(
        regimes=sorted({t.regime for t in selected}),
        role=role,
        n_traces=len(selected),
        decode_order=order_df,
        entropy_series=entropy_series,
        remaining_mask_series=rem_df,
        tokens_per_step_series=tps_df,
        confidence_decode_probability=conf_df,
        latency=latency_proxies(selected),
    )
    logger.info(
        f"Dynamics over {report.n_traces:,} traces (role={role or 'all'}): "
        f"{report.latency.get('mean_tokens_per_step', float('nan')):.2f} tokens/step"
    )
    return report


def latency_proxies(traces: Sequence[DecodeTrace]) -> Dict[str, float]:
    """
    Hardware-independent latency proxies (plus wall-clock, report-only).

    A step is a forward pass, counting passes whose commits all fell past
    END_ACTION and were dropped from the trace rows.

    Returns:
        mean_steps_per_action, mean_forward_passes_per_action,
        mean_tokens_per_step, wall_clock_total
    """
    if not traces:
        return {}
    steps = np.array([max(t.forward_passes, len(t.steps)) for t in traces], dtype=np.float64)
    tokens = np.array([sum(t.tokens_per_step()) for t in traces], dtype=np.float64)
    passes = np.array([t.forward_passes for t in traces], dtype=np.float64)
    return {
        "mean_steps_per_action": float(steps.mean()),
        "mean_forward_passes_per_action": float(passes.mean()),
        "mean_tokens_per_step": float(tokens.sum() / steps.sum()) if steps.sum() else float("nan"),
        "wall_clock_total": float(sum(s.wall_clock for t in traces for s in t.steps)),
    }
