"""
Attention Masks for dllm_agent_lab

Every mask is a dense boolean matrix; allow[i, j] means query i may attend
to key j. The diagonal is always allowed.

Kinds:
- Causal:      allow[i, j] <=> j <= i                      (AR training and decoding)
- SpanAware:   context rows causal over context only;
               action rows see all context and the whole action span
- BlockDecode: context rows causal; an action row in block b sees every
               position before the end of block b; nothing beyond the
               active block is visible
- NaiveBlock:  block-bidirectional tiling from position 0, blind to the
               context/action boundary (ablation)

With these definitions a whole-span BlockDecode mask equals the SpanAware
mask, and block_len=1 BlockDecode equals Causal.

Usage:
    from diffusion.masks import causal_mask, span_aware_mask, block_decode_mask

    mask = span_aware_mask(example.layout)
    allow = mask.to_tensor()
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional

import numpy as np
import torch

from world.trajectories import SpanLayout


class MaskKind(str, Enum):
    CAUSAL = "Causal"
    SPAN_AWARE = "SpanAware"
    BLOCK_DECODE = "BlockDecode"
    NAIVE_BLOCK = "NaiveBlock"


@dataclass(frozen=True, eq=False)
class AttentionMask:
    """Immutable square boolean attention matrix."""
    allow: np.ndarray
    kind: MaskKind

    def __post_init__(self) -> None:
        allow = np.asarray(self.allow, dtype=bool)
        if allow.ndim != 2 or allow.shape[0] != allow.shape[1]:
            raise ValueError(f"Attention mask must be square, got shape {allow.shape}")
        if not allow.diagonal().all():
            raise ValueError("Attention mask must allow every position to attend to itself")
        allow = allow.copy()
        allow.setflags(write=False)
        object.__setattr__(self, "allow", allow)

    @property
    def size(self) -> int:
        return self.allow.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionMask):
            return NotImplemented
        return self.allow.shape == other.allow.shape and bool((self.allow == other.allow).all())

    def to_tensor(self) -> torch.Tensor:
        return torch.from_numpy(self.allow.copy())

    def to_row_bitmaps(self) -> Dict:
        """Compact debug dump: one '0'/'1' string per query row."""
        return {
            "kind": self.kind.value,
            "size": self.size,
            "rows": ["".join("1" if v else "0" for v in row) for row in self.allow],
        }

    @classmethod
    def from_row_bitmaps(cls, data: Dict) -> "AttentionMask":
        allow = np.array([[c == "1" for c in row] for row in data["rows"]], dtype=bool)
        return cls(allow.reshape(data["size"], data["size"]), MaskKind(data["kind"]))


# ============================================
# Constructors
# ============================================


def causal_mask(n: int) -> AttentionMask:
    """Lower-triangular mask of size n."""
    if n < 1:
        raise ValueError(f"Mask size must be >= 1, got {n}")
    return AttentionMask(np.tril(np.ones((n, n), dtype=bool)), MaskKind.CAUSAL)


def span_aware_mask(layout: SpanLayout) -> AttentionMask:
    """
    Causal context plus a bidirectional action span.

    Context queries never reach action keys; action queries see every
    context key and every action key.
    """
    if not isinstance(layout, SpanLayout):
        raise ValueError(f"Expected SpanLayout, got {type(layout).__name__}")
    n = layout.total_len
    allow = np.tril(np.ones((n, n), dtype=bool))
    allow[layout.ctx_len:, :] = True
    return AttentionMask(allow, MaskKind.SPAN_AWARE)


def block_decode_mask(
    ctx_len: int,
    block_start: int,
    block_len: int,
    total_len: Optional[int] = None
) -> AttentionMask:
    """
    Mask for denoising the block [block_start, block_start + block_len).

    Action positions are tiled into blocks of block_len starting at ctx_len
    (the active block may be shorter than the tile). Each action row sees
    every key before the end of its own block; rows and keys past the
    active block are isolated.

    Args:
        ctx_len: Context length
        block_start: First position of the active block (>= ctx_len)
        block_len: Active block length
        total_len: Matrix size (defaults to the end of the active block)
    """
    block_end = block_start + block_len
    n = block_end if total_len is None else total_len
    if block_len < 1 or ctx_len < 0 or block_start < ctx_len or block_end > n:
        raise ValueError(
            f"Block out of bounds: ctx_len={ctx_len}, block=[{block_start}, {block_end}), total_len={n}"
        )

    allow = np.eye(n, dtype=bool)
    allow[:ctx_len, :ctx_len] = np.tril(np.ones((ctx_len, ctx_len), dtype=bool))
    for i in range(ctx_len, block_end):
        if i >= block_start:
            row_end = block_end
        else:
            row_end = min(ctx_len + ((i - ctx_len) // block_len + 1) * block_len, block_start)
        allow[i, :row_end] = True
    return AttentionMask(allow, MaskKind.BLOCK_DECODE)


def naive_block_mask(total_len: int, block_len: int) -> AttentionMask:
    """Block-bidirectional tiling from position 0, ignoring the span boundary."""
    if total_len < 1 or block_len < 1:
        raise ValueError(f"Invalid naive block mask: total_len={total_len}, block_len={block_len}")
    idx = np.arange(total_len)
    row_end = (idx // block_len + 1) * block_len
    allow = idx[None, :] < row_end[:, None]
    return AttentionMask(allow, MaskKind.NAIVE_BLOCK)


def mismatch_edge_count(a: AttentionMask, b: AttentionMask) -> int:
    """Number of attention edges present in a and absent in b."""
    if a.size != b.size:
        raise ValueError(f"Mask sizes differ: {a.size} vs {b.size}")
    return int((a.allow & ~b.allow).sum())
