"""
Agent-Oriented Fine-Tuning for dllm_agent_lab

Objectives over per-round (context, action span) examples:

    L_MDM  cross-entropy at masked action positions of the corrupted input,
           predicted in place under the span-aware mask
    L_AR   next-token cross-entropy over the clean action span (causal mask)
    L      L_MDM + lambda * L_AR       (diffusion regime, lambda = 0.5)
    L      L_AR                        (AR regime: same data, order and schedule)

Losses are per-token means inside an example, then means over the examples
of a batch that have at least one loss token. For L_MDM the action span is
filled with END_ACTION up to a multiple of block_len, which is what the block
decoder fills in at inference.

Usage:
    from diffusion.training import TrainConfig, train

    result = train(TrainConfig(regime="diffusion"), examples, ModelConfig(), vocab)
    result.loss_log.to_csv("loss_log.csv", index=False)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F

from core.config import ConfigurationError, NumericError
from core.utils import derive_seed, stable_hash
from diffusion.corruption import NoiseLevel, mask_positions, sample_level
from diffusion.masks import causal_mask, naive_block_mask, span_aware_mask
from diffusion.model import ModelConfig, TinyTransformer
from world.trajectories import TrainingExample
from world.vocab import Vocab


logger = logging.getLogger(__name__)

REGIMES = ("diffusion", "ar")


# ============================================
# Configuration and Loss Records
# ============================================


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization settings shared by both regimes.

    Attributes:
        epochs: Passes over the dataset
        lr_start: Learning rate at step 0
        lr_end: Learning rate at the last step (cosine decay)
        batch_size: Examples per step
        K: Maximum noise level
        lam: Weight of L_AR in the combined objective
        seed: Seed for batch order, levels and masks
        context_clean: Corrupt only the action span
        span_aware: Train with the span-aware mask (naive block mask otherwise)
        regime: 'diffusion' or 'ar'
        block_len: Decode block width; END_ACTION fill target and naive mask tile
        pad_to_block: Fill L_MDM action spans up to a multiple of block_len
        weight_decay: AdamW weight decay
        grad_clip: Max global gradient norm (0 disables clipping)
    """
    epochs: int = 5
    lr_start: float = 1e-3
    lr_end: float = 0.0
    batch_size: int = 16
    K: int = 16
    lam: float = 0.5
    seed: int = 0
    context_clean: bool = True
    span_aware: bool = True
    regime: str = "diffusion"
    block_len: int = 32
    pad_to_block: bool = True
    weight_decay: float = 0.01
    grad_clip: float = 1.0

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ConfigurationError(
                message=f"Unknown regime: {self.regime}",
                fix=f"Use one of: {', '.join(REGIMES)}"
            )
        if self.epochs < 1 or self.batch_size < 1 or self.K < 1 or self.block_len < 1:
            raise ConfigurationError(
                message="epochs, batch_size, K and block_len must all be >= 1.",
                fix="Check the train config file and flags."
            )
        if not 0.0 <= self.lr_end <= self.lr_start:
            raise ConfigurationError(
                message=f"Learning rate must decay: lr_start={self.lr_start}, lr_end={self.lr_end}",
                fix="Set 0 <= lr_end <= lr_start."
            )
        if self.lam < 0:
            raise ConfigurationError(message=f"lambda must be >= 0, got {self.lam}", fix="Use lam >= 0.")
        if self.weight_decay < 0:
            raise ConfigurationError(
                message=f"weight_decay must be >= 0, got {self.weight_decay}",
                fix="Use weight_decay >= 0."
            )

    @property
    def effective_lambda(self) -> float:
        return 1.0 if self.regime == "ar" else self.lam


@dataclass
class LossBreakdown:
    """Mean-per-token losses of one batch."""
    l_mdm: float
    l_ar: float
    lam: float
    l_total: float
    n_loss_tokens: int

    def to_dict(self) -> Dict[str, float]:
        return {
            "l_mdm": self.l_mdm,
            "l_ar": self.l_ar,
            "lambda": self.lam,
            "l_total": self.l_total,
            "n_loss_tokens": self.n_loss_tokens,
        }


@dataclass
class TrainResult:
    model: TinyTransformer
    loss_log: pd.DataFrame
    stream_hash: str
    steps: int
    epoch_losses: List[LossBreakdown] = field(default_factory=list)


# ============================================
# Loss Functions
# ============================================


def token_nll(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood of targets under per-row logits (rows x V)."""
    return F.cross_entropy(logits, targets, reduction="mean")


def _pad_batch(
    sequences: Sequence[torch.Tensor],
    masks: Sequence[torch.Tensor],
    pad_id: int
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Right-pad to a common length; pad rows see only themselves."""
    T = max(len(s) for s in sequences)
    tokens = torch.full((len(sequences), T), pad_id, dtype=torch.long)
    allow = torch.eye(T, dtype=torch.bool).repeat(len(sequences), 1, 1)
    for b, (seq, mask) in enumerate(zip(sequences, masks)):
        n = len(seq)
        tokens[b, :n] = seq
        allow[b, :n, :n] = mask
    return tokens, allow


def _mean_over_examples(per_example: List[Optional[torch.Tensor]], like: torch.Tensor) -> torch.Tensor:
    kept = [loss for loss in per_example if loss is not None]
    if not kept:
        return like.new_zeros(())
    return torch.stack(kept).mean()


def loss_mdm(
    model,
    examples: Sequence[TrainingExample],
    vocab: Vocab,
    levels: Sequence[NoiseLevel],
    seeds: Sequence[int],
    context_clean: bool = True,
    span_aware: bool = True,
    block_len: int = 32,
    pad_to_block: bool = True
) -> Tuple[torch.Tensor, int]:
    """
    Masked-diffusion loss of a batch.

    Each example is corrupted at its own level and seed; positions masked
    inside I_loss are scored in place (no shift). Examples with no masked
    action token contribute nothing.

    Args:
        model: Callable (tokens, allow) -> logits
        examples: Batch examples
        vocab: Vocabulary used to encode symbols
        levels: Noise level per example
        seeds: Corruption seed per example
        context_clean: Corrupt only I_loss (off: whole sequence)
        span_aware: Span-aware mask (off: naive block-bidirectional mask)
        block_len: Tile width of the naive mask and the END_ACTION fill target
        pad_to_block: Fill each action span with END_ACTION to a block multiple

    Returns:
        (mean loss tensor, number of scored tokens)
    """
    sequences, masks, targets = [], [], []
    for example, level, seed in zip(examples, levels, seeds):
        if pad_to_block:
            example = example.pad_to_blocks(block_len)
        clean = torch.tensor(vocab.encode(example.tokens), dtype=torch.long)
        positions = mask_positions(example.layout, level, seed, context_clean)
        noisy = clean.clone()
        noisy[torch.from_numpy(positions)] = vocab.mask_id
        scored = torch.from_numpy(positions[positions >= example.layout.ctx_len])
        if span_aware:
            mask = span_aware_mask(example.layout)
        else:
            mask = naive_block_mask(example.layout.total_len, block_len)
        sequences.append(noisy)
        masks.append(mask.to_tensor())
        targets.append((scored, clean[scored]))

    tokens, allow = _pad_batch(sequences, masks, vocab.pad_id)
    logits = model(tokens, allow)

    per_example: List[Optional[torch.Tensor]] = []
    n_tokens = 0
    for b, (positions, gold) in enumerate(targets):
        if len(positions) == 0:
            per_example.append(None)
            continue
        per_example.append(token_nll(logits[b, positions], gold))
        n_tokens += len(positions)
    return _mean_over_examples(per_example, logits), n_tokens


def loss_ar(model, examples: Sequence[TrainingExample], vocab: Vocab) -> Tuple[torch.Tensor, int]:
    """
    Next-token loss over the clean action span under the causal mask.

    Target x_i for i in I_loss is predicted from the logits at i - 1.

    Returns:
        (mean loss tensor, number of scored tokens)
    """
    sequences, masks = [], []
    for example in examples:
        sequences.append(torch.tensor(vocab.encode(example.tokens), dtype=torch.long))
        masks.append(causal_mask(example.layout.total_len).to_tensor())

    tokens, allow = _pad_batch(sequences, masks, vocab.pad_id)
    logits = model(tokens, allow)

    per_example: List[Optional[torch.Tensor]] = []
    n_tokens = 0
    for b, example in enumerate(examples):
        start = max(example.layout.ctx_len, 1)
        targets = torch.arange(start, example.layout.total_len)
        if len(targets) == 0:
            per_example.append(None)
            continue
        per_example.append(token_nll(logits[b, targets - 1], sequences[b][targets]))
        n_tokens += len(targets)
    return _mean_over_examples(per_example, logits), n_tokens


def combined_loss(
    model,
    examples: Sequence[TrainingExample],
    vocab: Vocab,
    config: TrainConfig,
    levels: Sequence[NoiseLevel],
    seeds: Sequence[int]
) -> Tuple[torch.Tensor, LossBreakdown]:
    """
    L = L_MDM + lambda * L_AR (diffusion) or L = L_AR (AR regime).

    Returns:
        (differentiable total, LossBreakdown with l_total computed from
        the same tensors)
    """
    l_ar, n_ar = loss_ar(model, examples, vocab)
    lam = config.effective_lambda
    if config.regime == "ar":
        l_mdm, n_mdm = l_ar.new_zeros(()), 0
    else:
        l_mdm, n_mdm = loss_mdm(
            model, examples, vocab, levels, seeds,
            context_clean=config.context_clean,
            span_aware=config.span_aware,
            block_len=config.block_len,
            pad_to_block=config.pad_to_block,
        )
    total = l_mdm + lam * l_ar
    breakdown = LossBreakdown(
        l_mdm=float(l_mdm.item()),
        l_ar=float(l_ar.item()),
        lam=lam,
        l_total=float(total.item()),
        n_loss_tokens=n_mdm if config.regime == "diffusion" else n_ar,
    )
    return total, breakdown


# ============================================
# Optimization Loop
# ============================================


def lr_at(step: int, total_steps: int, config: TrainConfig) -> float:
    """Cosine decay from lr_start (step 0) to lr_end (last step)."""
    if total_steps <= 1:
        return config.lr_start
    progress = step / (total_steps - 1)
    return config.lr_end + 0.5 * (config.lr_start - config.lr_end) * (1 + math.cos(math.pi * progress))


def batch_schedule(n_examples: int, config: TrainConfig) -> List[Tuple[int, List[int]]]:
    """
    The (epoch, example indices) stream of a run.

    Depends only on the dataset size, batch size, epochs and seed, so both
    regimes consume identical streams.
    """
    schedule = []
    for epoch in range(config.epochs):
        order = np.random.default_rng(derive_seed(config.seed, "order", epoch)).permutation(n_examples)
        for start in range(0, n_examples, config.batch_size):
            schedule.append((epoch, [int(i) for i in order[start:start + config.batch_size]]))
    return schedule


def _example_randomness(config: TrainConfig, epoch: int, indices: Sequence[int]) -> Tuple[List[NoiseLevel], List[int]]:
    levels = [sample_level(config.K, derive_seed(config.seed, "level", epoch, i)) for i in indices]
    seeds = [derive_seed(config.seed, "mask", epoch, i) for i in indices]
    return levels, seeds


def train(
    config: TrainConfig,
    examples: Sequence[TrainingExample],
    model_config: ModelConfig,
    vocab: Vocab
) -> TrainResult:
    """
    Fine-tune a fresh backbone on the examples.

    Args:
        config: Optimization settings and regime
        examples: Non-empty training set
        model_config: Backbone size
        vocab: Vocabulary the examples are written in

    Returns:
        TrainResult with the trained model, per-step loss log and the hash
        of the batch stream

    Raises:
        ConfigurationError: On an empty dataset or examples longer than max_len
        NumericError: If the loss diverges (names the step)
    """
    if not examples:
        raise ConfigurationError(message="Training set is empty.", fix="Run gen-data with --tasks > 0.")
    if model_config.vocab_size != vocab.size:
        raise ConfigurationError(
            message=f"Model vocab_size {model_config.vocab_size} != vocabulary size {vocab.size}.",
            fix="Use the vocab size recorded in the data manifest."
        )
    fill = config.block_len if config.regime == "diffusion" and config.pad_to_block else 1
    longest = max(e.pad_to_blocks(fill).layout.total_len for e in examples)
    if longest > model_config.max_len:
        raise ConfigurationError(
            message=f"Longest example has {longest} tokens, max_len is {model_config.max_len}.",
            fix="Increase max_len or generate shorter episodes."
        )

    torch.manual_seed(config.seed)
    model = TinyTransformer(model_config)
    model.train()
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr_start, weight_decay=config.weight_decay)

    schedule = batch_schedule(len(examples), config)
    stream_hash = stable_hash([indices for _, indices in schedule])
    logger.info(
        f"Training regime={config.regime} on {len(examples):,} examples, "
        f"{len(schedule):,} steps, stream={stream_hash[:12]}"
    )

    rows = []
    for step, (epoch, indices) in enumerate(schedule):
        lr = lr_at(step, len(schedule), config)
        for group in optimizer.param_groups:
            group["lr"] = lr

        batch = [examples[i] for i in indices]
        levels, seeds = _example_randomness(config, epoch, indices)
        total, breakdown = combined_loss(model, batch, vocab, config, levels, seeds)
        if not math.isfinite(breakdown.l_total):
            raise NumericError("Training loss diverged", where=f"step {step}")

        optimizer.zero_grad()
        total.backward()
        if config.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
        optimizer.step()

        rows.append({"step": step, "epoch": epoch, **breakdown.to_dict(), "lr": lr})
        if step % 50 == 0:
            logger.info(f"step {step} epoch {epoch} l_total={breakdown.l_total:.4f} lr={lr:.5f}")

    model.eval()
    loss_log = pd.DataFrame(rows, columns=["step", "epoch", "l_mdm", "l_ar", "lambda", "l_total", "n_loss_tokens", "lr"])
    epoch_losses = epoch_summary(loss_log)
    for epoch, summary in enumerate(epoch_losses):
        logger.info(f"epoch {epoch}: l_total={summary.l_total:.4f} l_mdm={summary.l_mdm:.4f} l_ar={summary.l_ar:.4f}")

    return TrainResult(model, loss_log, stream_hash, len(schedule), epoch_losses)


def epoch_summary(loss_log: pd.DataFrame) -> List[LossBreakdown]:
    """Mean LossBreakdown per epoch."""
    grouped = loss_log.groupby("epoch", sort=True)
    means = grouped[["l_mdm", "l_ar", "l_total"]].mean()
    tokens = grouped["n_loss_tokens"].sum()
    lam = grouped["lambda"].first()
    return [
        LossBreakdown(
            l_mdm=float(means.loc[e, "l_mdm"]),
            l_ar=float(means.loc[e, "l_ar"]),
            lam=float(lam.loc[e]),
            l_total=float(means.loc[e, "l_total"]),
            n_loss_tokens=int(tokens.loc[e]),
        )
        for e in means.index
    ]


@torch.no_grad()
def evaluate(
    model,
    examples: Sequence[TrainingExample],
    vocab: Vocab,
    K: int = 16,
    seed: int = 0,
    batch_size: int = 32,
    block_len: int = 32
) -> Dict[str, float]:
    """
    Held-out losses under inference-aligned conditions.

    L_MDM is always measured with context-clean corruption and the
    span-aware mask, at fixed per-example levels and seeds, so runs trained
    with different ablation flags are compared on identical inputs.

    Returns:
        {"l_mdm", "l_ar", "n_examples"}
    """
    if not examples:
        raise ValueError("evaluate() needs at least one example")
    mdm_sum, ar_sum, mdm_batches = 0.0, 0.0, 0
    n_batches = 0
    for start in range(0, len(examples), batch_size):
        batch = examples[start:start + batch_size]
        idx = range(start, start + len(batch))
        levels = [sample_level(K, derive_seed(seed, "eval-level", i)) for i in idx]
        seeds = [derive_seed(seed, "eval-mask", i) for i in idx]
        l_mdm, n_mdm = loss_mdm(model, batch, vocab, levels, seeds, block_len=block_len)
        l_ar, _ = loss_ar(model, batch, vocab)
        if n_mdm:
            mdm_sum += float(l_mdm.item())
            mdm_batches += 1
        ar_sum += float(l_ar.item())
        n_batches += 1
    return {
        "l_mdm": mdm_sum / max(mdm_batches, 1),
        "l_ar": ar_sum / n_batches,
        "n_examples": len(examples),
    }
