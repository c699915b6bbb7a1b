"""
Log Validation for dllm_agent_lab

Checks decode-trace and episode JSONL files before anything aggregates
them. A bad line stops the analysis with a TraceSchemaError naming its
line number; nothing is silently skipped.

Usage:
    from analysis.validation import load_traces, load_episode_records

    traces = load_traces("runs/dllm/traces.jsonl")
    records = load_episode_records("runs/dllm/episodes.jsonl")
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple, Union

from agent.runtime import EpisodeRecord
from core.config import TraceSchemaError
from diffusion.decoding import REGIMES, DecodeStep, DecodeTrace


logger = logging.getLogger(__name__)

ENTROPY_TOLERANCE = 1e-9

# Field -> accepted types
TRACE_SCHEMA: Dict[str, tuple] = {
    "trace_id": (str,),
    "regime": (str,),
    "role": (str,),
    "block_len": (int,),
    "vocab_size": (int,),
    "span_len": (int,),
    "truncated": (bool,),
    "forward_passes": (int,),
    "block": (int,),
    "step": (int,),
    "positions": (list,),
    "tokens": (list,),
    "confidences": (list,),
    "masked_positions": (list,),
    "masked_confidences": (list,),
    "masked_entropies": (list,),
    "remaining": (int,),
    "wall_clock": (int, float),
}


def _read_lines(path: Union[str, Path]) -> Iterator[Tuple[int, Dict[str, Any]]]:
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceSchemaError(f"not valid JSON ({e.msg})", line_number)
            if not isinstance(record, dict):
                raise TraceSchemaError("expected a JSON object", line_number)
            yield line_number, record


def validate_trace_row(row: Dict[str, Any], line_number: int) -> None:
    """
    Check one decode-trace row.

    Raises:
        TraceSchemaError: On a missing field, a wrong type or a value out of range
    """
    for name, types in TRACE_SCHEMA.items():
        if name not in row:
            raise TraceSchemaError(f"missing field '{name}'", line_number)
        value = row[name]
        # bool is an int subclass
        if isinstance(value, bool) and bool not in types:
            raise TraceSchemaError(f"field '{name}' has type bool", line_number)
        if not isinstance(value, types):
            raise TraceSchemaError(f"field '{name}' has type {type(value).__name__}", line_number)

    if row["regime"] not in REGIMES:
        raise TraceSchemaError(f"unknown regime '{row['regime']}'", line_number)
    if row["block_len"] < 1 or row["vocab_size"] < 2:
        raise TraceSchemaError("block_len must be >= 1 and vocab_size >= 2", line_number)
    if row["block"] < 0 or row["step"] < 1 or row["remaining"] < 0:
        raise TraceSchemaError("block/step/remaining out of range", line_number)

    n = len(row["positions"])
    if n == 0 or len(row["tokens"]) != n or len(row["confidences"]) != n:
        raise TraceSchemaError("positions, tokens and confidences must be non-empty and equally long", line_number)
    m = len(row["masked_positions"])
    if len(row["masked_confidences"]) != m or len(row["masked_entropies"]) != m:
        raise TraceSchemaError("masked_* lists must be equally long", line_number)
    if not set(row["positions"]) <= set(row["masked_positions"]):
        raise TraceSchemaError("committed a position that was not masked", line_number)

    for c in list(row["confidences"]) + list(row["masked_confidences"]):
        if not isinstance(c, (int, float)) or not 0.0 <= c <= 1.0:
            raise TraceSchemaError(f"confidence {c!r} outside [0, 1]", line_number)
    upper = math.log(row["vocab_size"]) + ENTROPY_TOLERANCE
    for e in row["masked_entropies"]:
        if not isinstance(e, (int, float)) or not -ENTROPY_TOLERANCE <= e <= upper:
            raise TraceSchemaError(f"entropy {e!r} outside [0, ln V]", line_number)


def load_traces(path: Union[str, Path]) -> List[DecodeTrace]:
    """
    Load and validate a traces.jsonl file.

    Rows of one trace are consecutive; a trace_id reappearing after another
    trace started is a schema violation.

    Args:
        path: JSONL file written by the run stage

    Returns:
        DecodeTraces in file order
    """
    traces: List[DecodeTrace] = []
    closed: set = set()
    for line_number, row in _read_lines(path):
        validate_trace_row(row, line_number)
        if not traces or traces[-1].trace_id != row["trace_id"]:
            if row["trace_id"] in closed:
                raise TraceSchemaError(f"rows of trace '{row['trace_id']}' are not contiguous", line_number)
            if traces:
                closed.add(traces[-1].trace_id)
            traces.append(DecodeTrace(
                trace_id=row["trace_id"],
                regime=row["regime"],
                role=row["role"],
                block_len=row["block_len"],
                vocab_size=row["vocab_size"],
                span_len=row["span_len"],
                truncated=row["truncated"],
                forward_passes=row["forward_passes"],
            ))
        trace = traces[-1]
        trace.steps.append(DecodeStep(
            block=row["block"],
            step=row["step"],
            positions=list(row["positions"]),
            tokens=list(row["tokens"]),
            confidences=[float(c) for c in row["confidences"]],
            masked_positions=list(row["masked_positions"]),
            masked_confidences=[float(c) for c in row["masked_confidences"]],
            masked_entropies=[float(e) for e in row["masked_entropies"]],
            remaining=row["remaining"],
            wall_clock=float(row["wall_clock"]),
        ))

    logger.info(f"Loaded {len(traces):,} decode traces from {path}")
    return traces


def load_episode_records(path: Union[str, Path]) -> List[EpisodeRecord]:
    """
    Load an episodes.jsonl file.

    Raises:
        TraceSchemaError: When a line cannot be turned into an EpisodeRecord
    """
    records = []
    for line_number, row in _read_lines(path):
        try:
            records.append(EpisodeRecord.from_dict(row))
        except (KeyError, TypeError, ValueError) as e:
            raise TraceSchemaError(f"bad episode record ({type(e).__name__}: {e})", line_number)
    logger.info(f"Loaded {len(records):,} episode records from {path}")
    return records
