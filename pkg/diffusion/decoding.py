"""
Action Decoding for dllm_agent_lab

Two decoders over the same backbone interface:

- decode_diffusion: the action span is split into blocks of block_len,
  decoded left to right. Inside a block every position starts as <mask>;
  each step scores the still-masked positions, commits every position whose
  max softmax probability exceeds tau (or the single most confident one when
  none does) and never re-masks. Decoding stops once END_ACTION is committed
  with every earlier position committed.
- decode_ar: greedy argmax, one token per step, under the causal mask.

Both record a DecodeTrace with one entry per step. After END_ACTION the
trace is cut: commits past the END position are dropped (the forward pass
that made them still counts in forward_passes).

Usage:
    from diffusion.decoding import DecodeConfig, ModelScorer, decode_diffusion

    result = decode_diffusion(ModelScorer(model), context_ids, DecodeConfig(), vocab)
    print(result.tokens, result.trace.tokens_per_step())
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np
import torch
from scipy.stats import entropy as scipy_entropy

from core.config import ConfigurationError
from diffusion.masks import block_decode_mask, causal_mask
from world.vocab import END_ACTION, Vocab


logger = logging.getLogger(__name__)

REGIMES = ("diffusion", "ar")


# ============================================
# Configuration
# ============================================


@dataclass(frozen=True)
class DecodeConfig:
    """
    Decoder settings.

    Attributes:
        tau: Confidence threshold in (0, 1]
        block_len: Positions per block
        max_action_len: Longest action span before truncation
        max_steps_per_block: Step ceiling per block (defaults to block_len)
        regime: 'diffusion' or 'ar'
    """
    tau: float = 0.9
    block_len: int = 32
    max_action_len: int = 64
    max_steps_per_block: Optional[int] = None
    regime: str = "diffusion"

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ConfigurationError(message=f"tau must be in (0, 1], got {self.tau}", fix="Use e.g. --tau 0.9")
        if self.block_len < 1 or self.max_action_len < 1:
            raise ConfigurationError(
                message=f"block_len and max_action_len must be >= 1 (got {self.block_len}, {self.max_action_len})",
                fix="Use positive block and action lengths."
            )
        if self.max_steps_per_block is not None and self.max_steps_per_block < self.block_len:
            raise ConfigurationError(
                message=f"max_steps_per_block={self.max_steps_per_block} < block_len={self.block_len}",
                fix="A block needs up to block_len steps under the fallback rule; raise the step ceiling."
            )
        if self.regime not in REGIMES:
            raise ConfigurationError(message=f"Unknown regime: {self.regime}", fix=f"Use one of: {', '.join(REGIMES)}")

    @property
    def steps_per_block(self) -> int:
        return self.max_steps_per_block or self.block_len


# ============================================
# Scorers
# ============================================


class PositionScorer(Protocol):
    """
    Logits for target positions.

    shift=False reads the row of the target itself (denoising a <mask> in
    place); shift=True reads the row before it (next-token prediction).
    """

    def score(self, tokens: torch.Tensor, allow: torch.Tensor, positions: Sequence[int], shift: bool) -> torch.Tensor:
        ...


class ModelScorer:
    """Adapts a (tokens, allow) -> logits backbone to PositionScorer."""

    def __init__(self, model):
        self.model = model

    @torch.no_grad()
    def score(self, tokens: torch.Tensor, allow: torch.Tensor, positions: Sequence[int], shift: bool) -> torch.Tensor:
        logits = self.model(tokens, allow)
        rows = torch.tensor([p - 1 if shift else p for p in positions], dtype=torch.long)
        return logits[rows]


class ScriptedScorer:
    """
    Fixed logits per action-relative position, independent of the input.

    Useful for exercising the decoders with exact, hand-set confidences.
    """

    def __init__(self, logits: torch.Tensor, ctx_len: int):
        self.logits = logits
        self.ctx_len = ctx_len

    @classmethod
    def from_confidences(
        cls,
        confidences: Sequence[float],
        token_ids: Sequence[int],
        vocab_size: int,
        ctx_len: int
    ) -> "ScriptedScorer":
        """Position p predicts token_ids[p] with probability confidences[p]; the rest is spread evenly."""
        probs = torch.empty(len(confidences), vocab_size, dtype=torch.float64)
        for p, (conf, tok) in enumerate(zip(confidences, token_ids)):
            probs[p] = (1.0 - conf) / (vocab_size - 1)
            probs[p, tok] = conf
        return cls(torch.log(probs), ctx_len)

    def score(self, tokens: torch.Tensor, allow: torch.Tensor, positions: Sequence[int], shift: bool) -> torch.Tensor:
        return self.logits[[p - self.ctx_len for p in positions]]


# ============================================
# Traces
# ============================================


def entropy(weights) -> float:
    """
    Shannon entropy (nats) of a nonnegative weight vector, normalized first.

    Raises:
        ValueError: On negative weights or a non-positive sum
    """
    w = np.asarray(weights, dtype=np.float64)
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("entropy() needs nonnegative weights with a positive sum")
    return float(scipy_entropy(w))


@dataclass
class DecodeStep:
    """
    One decoding step. Positions are relative to the action start.

    Attributes:
        block: Block index
        step: One-based step index within the block
        positions: Positions committed this step
        tokens: Symbols committed this step
        confidences: Confidence of each committed position
        masked_positions: Positions still masked before the step
        masked_confidences: Confidence of each still-masked position
        masked_entropies: Entropy of each still-masked position
        remaining: Count of masked positions in the block before the step
        wall_clock: Seconds spent in the step
    """
    block: int
    step: int
    positions: List[int]
    tokens: List[str]
    confidences: List[float]
    masked_positions: List[int]
    masked_confidences: List[float]
    masked_entropies: List[float]
    remaining: int
    wall_clock: float


@dataclass
class DecodeTrace:
    trace_id: str
    regime: str
    role: str
    block_len: int
    vocab_size: int
    steps: List[DecodeStep] = field(default_factory=list)
    span_len: int = 0
    truncated: bool = False
    forward_passes: int = 0

    def tokens_per_step(self) -> List[int]:
        return [len(s.positions) for s in self.steps]

    def records(self) -> List[Dict]:
        """JSONL rows, one per step."""
        return [
            {
                "trace_id": self.trace_id,
                "regime": self.regime,
                "role": self.role,
                "block_len": self.block_len,
                "vocab_size": self.vocab_size,
                "span_len": self.span_len,
                "truncated": self.truncated,
                "forward_passes": self.forward_passes,
                "block": s.block,
                "step": s.step,
                "positions": s.positions,
                "tokens": s.tokens,
                "confidences": s.confidences,
                "masked_positions": s.masked_positions,
                "masked_confidences": s.masked_confidences,
                "masked_entropies": s.masked_entropies,
                "remaining": s.remaining,
                "wall_clock": s.wall_clock,
            }
            for s in self.steps
        ]


@dataclass
class DecodeResult:
    tokens: List[str]
    trace: DecodeTrace

    @property
    def truncated(self) -> bool:
        return self.trace.truncated


def _score_step(scorer: PositionScorer, tokens, allow, positions, shift):
    logits = scorer.score(tokens, allow, positions, shift).to(torch.float64)
    probs = torch.softmax(logits, dim=-1)
    conf, pred = probs.max(dim=-1)
    ents = scipy_entropy(probs.numpy(), axis=-1)
    return conf.tolist(), pred.tolist(), [float(e) for e in ents]


def _check_length(scorer: PositionScorer, ctx_len: int, config: DecodeConfig) -> None:
    model = getattr(scorer, "model", None)
    max_len = getattr(getattr(model, "config", None), "max_len", None)
    if max_len is not None and ctx_len + config.max_action_len > max_len:
        raise ValueError(f"Context {ctx_len} + max_action_len {config.max_action_len} exceeds max_len {max_len}")


def _truncate_after_end(steps: List[DecodeStep], end_pos: int, block_len: int) -> List[DecodeStep]:
    """Drop commits past END_ACTION, renumber steps, recompute remaining counts."""
    kept: List[DecodeStep] = []
    committed: set = set()
    step_in_block: Dict[int, int] = {}
    for s in steps:
        pairs = [(p, t, c) for p, t, c in zip(s.positions, s.tokens, s.confidences) if p <= end_pos]
        if not pairs:
            continue
        masked = [(p, c, e) for p, c, e in zip(s.masked_positions, s.masked_confidences, s.masked_entropies) if p <= end_pos]
        block_positions = range(s.block * block_len, min((s.block + 1) * block_len, end_pos + 1))
        remaining = sum(1 for p in block_positions if p not in committed)
        step_in_block[s.block] = step_in_block.get(s.block, 0) + 1
        kept.append(DecodeStep(
            block=s.block,
            step=step_in_block[s.block],
            positions=[p for p, _, _ in pairs],
            tokens=[t for _, t, _ in pairs],
            confidences=[c for _, _, c in pairs],
            masked_positions=[p for p, _, _ in masked],
            masked_confidences=[c for _, c, _ in masked],
            masked_entropies=[e for _, _, e in masked],
            remaining=remaining,
            wall_clock=s.wall_clock,
        ))
        committed.update(p for p, _, _ in pairs)
    return kept


# ============================================
# Decoders
# ============================================


def decode_diffusion(
    scorer: PositionScorer,
    context_ids: Sequence[int],
    config: DecodeConfig,
    vocab: Vocab,
    trace_id: str = "",
    role: str = "planner"
) -> DecodeResult:
    """
    Confidence-gated block-wise denoising of one action span.

    Args:
        scorer: Backbone adapter (ModelScorer or ScriptedScorer)
        context_ids: Serialized history as token ids
        config: Decoder settings
        vocab: Vocabulary (mask and END_ACTION ids)
        trace_id: Identifier carried by every trace row
        role: Acting role recorded in the trace

    Returns:
        DecodeResult; trace.truncated is set when no END_ACTION was produced
    """
    _check_length(scorer, len(context_ids), config)
    ctx = list(context_ids)
    ctx_len = len(ctx)
    end_id = vocab.end_action_id
    L, M = config.block_len, config.max_action_len

    action: Dict[int, int] = {}
    steps: List[DecodeStep] = []
    forward_passes = 0
    end_pos: Optional[int] = None

    for b in range(math.ceil(M / L)):
        rel_start = b * L
        blen = min(L, M - rel_start)
        seq = ctx + [action[p] for p in range(rel_start)] + [vocab.mask_id] * blen
        tokens = torch.tensor(seq, dtype=torch.long)
        allow = block_decode_mask(ctx_len, ctx_len + rel_start, blen).to_tensor()
        masked = list(range(rel_start, rel_start + blen))

        step = 0
        while masked and step < config.steps_per_block:
            started = time.perf_counter()
            conf, pred, ents = _score_step(scorer, tokens, allow, [ctx_len + p for p in masked], shift=False)
            forward_passes += 1

            chosen = [i for i, c in enumerate(conf) if c > config.tau]
            if not chosen:
                chosen = [int(np.argmax(conf))]
            for i in chosen:
                action[masked[i]] = pred[i]
                tokens[ctx_len + masked[i]] = pred[i]

            step += 1
            steps.append(DecodeStep(
                block=b,
                step=step,
                positions=[masked[i] for i in chosen],
                tokens=vocab.decode(pred[i] for i in chosen),
                confidences=[conf[i] for i in chosen],
                masked_positions=list(masked),
                masked_confidences=conf,
                masked_entropies=ents,
                remaining=len(masked),
                wall_clock=time.perf_counter() - started,
            ))
            chosen_set = set(chosen)
            masked = [p for i, p in enumerate(masked) if i not in chosen_set]

            ends = [p for p, t in action.items() if t == end_id]
            if ends and all(q in action for q in range(min(ends))):
                end_pos = min(ends)
                break
        if end_pos is not None:
            break

    trace = DecodeTrace(trace_id, "diffusion", role, L, vocab.size, forward_passes=forward_passes)
    if end_pos is None:
        trace.steps = steps
        trace.truncated = True
        trace.span_len = len(action)
        out = [action[p] for p in sorted(action)]
    else:
        trace.steps = _truncate_after_end(steps, end_pos, L)
        trace.span_len = end_pos + 1
        out = [action[p] for p in range(end_pos + 1)]
    return DecodeResult(vocab.decode(out), trace)


def decode_ar(
    scorer: PositionScorer,
    context_ids: Sequence[int],
    config: DecodeConfig,
    vocab: Vocab,
    trace_id: str = "",
    role: str = "planner"
) -> DecodeResult:
    """
    Greedy left-to-right decoding, one commit per step.

    Steps are grouped into the same blocks as the diffusion decoder
    (position // block_len) so both traces share one schema; remaining
    counts are filled in once the span length is known.
    """
    _check_length(scorer, len(context_ids), config)
    seq = list(context_ids)
    ctx_len = len(seq)
    L = config.block_len
    end_id = vocab.end_action_id

    steps: List[DecodeStep] = []
    truncated = True
    for p in range(config.max_action_len):
        started = time.perf_counter()
        tokens = torch.tensor(seq, dtype=torch.long)
        allow = causal_mask(len(seq)).to_tensor()
        conf, pred, ents = _score_step(scorer, tokens, allow, [ctx_len + p], shift=True)
        steps.append(DecodeStep(
            block=p // L,
            step=p % L + 1,
            positions=[p],
            tokens=vocab.decode(pred),
            confidences=conf,
            masked_positions=[p],
            masked_confidences=conf,
            masked_entropies=ents,
            remaining=0,
            wall_clock=time.perf_counter() - started,
        ))
        seq.append(pred[0])
        if pred[0] == end_id:
            truncated = False
            break

    span_len = len(steps)
    for s in steps:
        block_end = min((s.block + 1) * L, span_len)
        s.remaining = block_end - s.positions[0]

    trace = DecodeTrace(trace_id, "ar", role, L, vocab.size, steps, span_len, truncated, forward_passes=len(steps))
    return DecodeResult(vocab.decode(seq[ctx_len:]), trace)


def decode(
    scorer: PositionScorer,
    context_ids: Sequence[int],
    config: DecodeConfig,
    vocab: Vocab,
    trace_id: str = "",
    role: str = "planner"
) -> DecodeResult:
    """Dispatch on config.regime."""
    fn = decode_diffusion if config.regime == "diffusion" else decode_ar
    return fn(scorer, context_ids, config, vocab, trace_id=trace_id, role=role)
