"""
Context-Clean Corruption for dllm_agent_lab

The corruption operator C_k replaces each action-span token by <mask>
independently with probability k/K. With context_clean switched off (the
ablation), every position of the sequence is eligible instead.

Usage:
    from diffusion.corruption import NoiseLevel, corrupt, sample_level

    level = sample_level(K=16, seed=3)
    noisy, plan = corrupt(example, level, seed=11)
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from world.trajectories import SpanLayout, TrainingExample
from world.vocab import MASK


DEFAULT_K = 16


@dataclass(frozen=True)
class NoiseLevel:
    """Corruption level k out of K."""
    k: int
    K: int = DEFAULT_K

    def __post_init__(self) -> None:
        if self.K < 1 or not 1 <= self.k <= self.K:
            raise ValueError(f"Noise level out of range: k={self.k}, K={self.K}")

    @property
    def rate(self) -> float:
        return self.k / self.K


@dataclass(frozen=True)
class CorruptionPlan:
    """
    Exactly which positions C_k replaced.

    Attributes:
        masked_positions: Sorted absolute positions set to <mask>
        level: Noise level used
        rng_seed: Seed of the masking draw
        context_clean: Whether only I_loss was eligible
    """
    masked_positions: Tuple[int, ...]
    level: NoiseLevel
    rng_seed: int
    context_clean: bool = True

    def to_dict(self) -> Dict:
        return {
            "masked_positions": list(self.masked_positions),
            "k": self.level.k,
            "K": self.level.K,
            "rng_seed": self.rng_seed,
            "context_clean": self.context_clean,
        }


def sample_level(K: int, seed: int) -> NoiseLevel:
    """Draw k uniformly from {1..K}."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    rng = np.random.default_rng(seed)
    return NoiseLevel(k=int(rng.integers(1, K + 1)), K=K)


def mask_positions(layout: SpanLayout, level: NoiseLevel, seed: int, context_clean: bool = True) -> np.ndarray:
    """
    Draw the positions C_k masks.

    Args:
        layout: Span layout of the example
        level: Noise level
        seed: Draw seed
        context_clean: Restrict eligibility to I_loss

    Returns:
        Sorted int64 array of absolute positions
    """
    eligible = np.arange(layout.ctx_len if context_clean else 0, layout.total_len)
    rng = np.random.default_rng(seed)
    hits = rng.random(eligible.size) < level.rate
    return eligible[hits]


def corrupt(
    example: TrainingExample,
    level: NoiseLevel,
    seed: int,
    context_clean: bool = True
) -> Tuple[List[str], CorruptionPlan]:
    """
    Apply C_k to an example.

    Context positions are copied verbatim when context_clean is on; each
    eligible position becomes <mask> with probability k/K.

    Returns:
        (corrupted tokens, plan recording exactly the replaced positions)
    """
    positions = mask_positions(example.layout, level, seed, context_clean)
    tokens = list(example.tokens)
    for pos in positions:
        tokens[int(pos)] = MASK
    plan = CorruptionPlan(tuple(int(p) for p in positions), level, seed, context_clean)
    return tokens, plan


def apply_plan(tokens: Sequence[str], plan: CorruptionPlan) -> List[str]:
    """Re-apply a recorded plan to clean tokens."""
    out = list(tokens)
    for pos in plan.masked_positions:
        out[pos] = MASK
    return out
