"""
Tiny Transformer Backbone for dllm_agent_lab

One network serves both regimes: with a causal mask it is the AR next-token
predictor, with a span-aware or block-decode mask it is the denoiser that
fills <mask> positions in place. The noise level is not an input; the
masked sequence carries it.

Architecture:
- learned token and absolute position embeddings
- n_layers pre-LayerNorm blocks (masked multi-head attention + GELU FFN)
- final LayerNorm, a bias-free d x d output projection, then the tied
  token-embedding matrix as the readout

Usage:
    from diffusion.model import ModelConfig, TinyTransformer

    model = TinyTransformer(ModelConfig(vocab_size=256))
    logits = model(tokens, allow)          # (B, T) ids, (B, T, T) bool
"""

import logging
import math
import pickle
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from core.config import ConfigurationError, NumericError
from core.utils import ensure_directory_exists


logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "dllm_agent_lab.checkpoint.v1"


@dataclass(frozen=True)
class ModelConfig:
    """
    Backbone size.

    Attributes:
        vocab_size: V
        d_model: Residual width
        n_layers: Transformer blocks
        n_heads: Attention heads (must divide d_model)
        max_len: Longest sequence the position table covers
        seed: Initialization seed
    """
    vocab_size: int = 256
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    max_len: int = 512
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.vocab_size, self.d_model, self.n_layers, self.n_heads, self.max_len) < 1:
            raise ConfigurationError(
                message=f"Model sizes must be positive: {asdict(self)}",
                fix="Use positive vocab_size, d_model, n_layers, n_heads and max_len."
            )
        if self.d_model % self.n_heads:
            raise ConfigurationError(
                message=f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}.",
                fix="Pick n_heads that divides d_model (e.g. d_model=64, n_heads=4)."
            )


# ============================================
# Layers
# ============================================


class MaskedSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)

    def forward(self, h: torch.Tensor, allow: torch.Tensor) -> torch.Tensor:
        B, T, D = h.shape
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        q = q.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        k = k.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        v = v.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)

        scores = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~allow[:, None, :, :], float("-inf"))
        weights = F.softmax(scores, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(B, T, D)
        return self.proj(out)


class TransformerBlock(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = MaskedSelfAttention(d_model, n_heads)
        self.ln2 = nn.LayerNorm(d_model)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, h: torch.Tensor, allow: torch.Tensor) -> torch.Tensor:
        h = h + self.attn(self.ln1(h), allow)
        return h + self.ffn(self.ln2(h))


class TinyTransformer(nn.Module):
    """
    Mask-agnostic transformer producing per-position logits over V.

    Logits at position i depend only on tokens j reachable from i through
    allowed edges; for transitively closed masks (all mask kinds in
    diffusion.masks) that is exactly {j : allow[i, j]}.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)
        self.tok_emb = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_emb = nn.Embedding(config.max_len, config.d_model)
        self.blocks = nn.ModuleList(
            TransformerBlock(config.d_model, config.n_heads) for _ in range(config.n_layers)
        )
        self.ln_f = nn.LayerNorm(config.d_model)
        self.out_proj = nn.Linear(config.d_model, config.d_model, bias=False)
        nn.init.normal_(self.tok_emb.weight, std=0.02)
        nn.init.normal_(self.pos_emb.weight, std=0.02)

    def forward(self, tokens: torch.Tensor, allow: torch.Tensor) -> torch.Tensor:
        """
        Run the backbone under an explicit attention mask.

        Args:
            tokens: (T,) or (B, T) token ids
            allow: (T, T) or (B, T, T) boolean mask, allow[i, j] = i may see j

        Returns:
            (B, T, V) logits ((T, V) for unbatched input)

        Raises:
            ValueError: On shape mismatch or sequences longer than max_len
            NumericError: If a block produces non-finite activations
        """
        unbatched = tokens.dim() == 1
        if unbatched:
            tokens = tokens[None]
            allow = allow[None]
        if tokens.dim() != 2:
            raise ValueError(f"tokens must be (T,) or (B, T), got {tuple(tokens.shape)}")
        B, T = tokens.shape
        if T > self.config.max_len:
            raise ValueError(f"Sequence length {T} exceeds max_len={self.config.max_len}")
        if tuple(allow.shape) != (B, T, T):
            raise ValueError(f"Mask shape {tuple(allow.shape)} does not match tokens {(B, T)}")

        allow = allow.to(torch.bool) | torch.eye(T, dtype=torch.bool, device=allow.device)
        positions = torch.arange(T, device=tokens.device)
        h = self.tok_emb(tokens) + self.pos_emb(positions)[None]

        for index, block in enumerate(self.blocks):
            h = block(h, allow)
            if not torch.isfinite(h).all():
                raise NumericError("Non-finite activation", where=f"layer {index}")

        logits = self.out_proj(self.ln_f(h)) @ self.tok_emb.weight.T
        return logits[0] if unbatched else logits

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


# ============================================
# Gradients
# ============================================


def compute_gradients(model: nn.Module, loss_fn: Callable[[], torch.Tensor]) -> Dict[str, torch.Tensor]:
    """
    Reverse-mode gradients of a scalar loss for every named parameter.

    Args:
        model: Module whose parameters the loss depends on
        loss_fn: Zero-argument closure returning a scalar tensor

    Returns:
        Parameter name -> gradient (zeros for parameters the loss ignores)

    Raises:
        ValueError: If the loss is not a scalar
        NumericError: If any gradient is non-finite (names the parameter)
    """
    named = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    loss = loss_fn()
    if loss.dim() != 0:
        raise ValueError(f"Loss must be a scalar, got shape {tuple(loss.shape)}")

    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    out: Dict[str, torch.Tensor] = {}
    for (name, param), grad in zip(named, grads):
        grad = torch.zeros_like(param) if grad is None else grad
        if not torch.isfinite(grad).all():
            raise NumericError("Non-finite gradient", where=name)
        out[name] = grad
    return out


# ============================================
# Checkpoints
# ============================================


def save_checkpoint(
    path: Union[str, Path],
    model: TinyTransformer,
    step: int,
    extra: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Save {format, config, state_dict, step, vocab_size, saved_at, extra}.

    The container is a torch.save archive; loading it back and saving again
    yields identical tensors.
    """
    path = Path(path)
    ensure_directory_exists(path.parent)
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "config": asdict(model.config),
            "state_dict": model.state_dict(),
            "step": int(step),
            "vocab_size": model.config.vocab_size,
            "saved_at": datetime.now().isoformat(),
            "extra": extra or {},
        },
        path,
    )
    logger.info(f"Checkpoint saved to {path} (step {step}, {model.num_parameters():,} parameters)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[TinyTransformer, Dict[str, Any]]:
    """
    Load a checkpoint written by save_checkpoint.

    Returns:
        (model in eval mode, metadata dict without the state_dict)

    Raises:
        ConfigurationError: If the file is missing or not a lab checkpoint
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(
            message=f"Checkpoint not found: {path}",
            fix="Run the train subcommand first or pass the correct --ckpt path."
        )
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except (EOFError, RuntimeError, pickle.UnpicklingError) as e:
        raise ConfigurationError(
            message=f"Cannot read checkpoint {path}: {e}",
            fix="Pass a checkpoint produced by the train subcommand."
        )
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(
            message=f"{path} is not a dllm_agent_lab checkpoint.",
            fix="Pass a checkpoint produced by the train subcommand."
        )
    model = TinyTransformer(ModelConfig(**payload["config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    meta = {k: v for k, v in payload.items() if k != "state_dict"}
    return model, meta
