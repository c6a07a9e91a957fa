"""A tiny self-contained decoder with conventional projection names.

The point of this model is its module structure — per-layer ``q_proj`` /
``k_proj`` / ``v_proj`` / ``o_proj`` attention projections and
``gate_proj`` / ``up_proj`` / ``down_proj`` MLP projections, the naming
convention the capture filters target — not its language-modeling
quality. ``build_tiny`` gives a deterministic randomly-initialized
instance; ``save_checkpoint`` / ``load_model`` round-trip real weights
through a single-file checkpoint.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F


@dataclass(frozen=True)
class DecoderConfig:
    """Shape of a :class:`TinyDecoder`.

    ``vocab_size`` defaults to 256 so UTF-8 bytes tokenize directly.
    """

    vocab_size: int = 256
    hidden: int = 64
    intermediate: int = 128
    layers: int = 2
    heads: int = 4

    def __post_init__(self) -> None:
        for field_name in ("vocab_size", "hidden", "intermediate", "layers", "heads"):
            value = getattr(self, field_name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{field_name} must be a positive int, got {value!r}")
        if self.hidden % self.heads != 0:
            raise ValueError(
                f"hidden ({self.hidden}) must be divisible by heads ({self.heads})"
            )


class Attention(nn.Module):
    def __init__(self, cfg: DecoderConfig) -> None:
        super().__init__()
        self.heads = cfg.heads
        self.head_dim = cfg.hidden // cfg.heads
        self.q_proj = nn.Linear(cfg.hidden, cfg.hidden, bias=False)
        self.k_proj = nn.Linear(cfg.hidden, cfg.hidden, bias=False)
        self.v_proj = nn.Linear(cfg.hidden, cfg.hidden, bias=False)
        self.o_proj = nn.Linear(cfg.hidden, cfg.hidden, bias=False)

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        batch, seq, width = hidden.shape
        shape = (batch, seq, self.heads, self.head_dim)
        q = self.q_proj(hidden).view(shape).transpose(1, 2)
        k = self.k_proj(hidden).view(shape).transpose(1, 2)
        v = self.v_proj(hidden).view(shape).transpose(1, 2)
        attended = F.scaled_dot_product_attention(q, k, v, is_causal=seq > 1)
        merged = attended.transpose(1, 2).reshape(batch, seq, width)
        return self.o_proj(merged)


class Mlp(nn.Module):
    def __init__(self, cfg: DecoderConfig) -> None:
        super().__init__()
        self.gate_proj = nn.Linear(cfg.hidden, cfg.intermediate, bias=False)
        self.up_proj = nn.Linear(cfg.hidden, cfg.intermediate, bias=False)
        self.down_proj = nn.Linear(cfg.intermediate, cfg.hidden, bias=False)

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        return self.down_proj(F.silu(self.gate_proj(hidden)) * self.up_proj(hidden))


class Block(nn.Module):
    def __init__(self, cfg: DecoderConfig) -> None:
        super().__init__()
        self.attn_norm = nn.RMSNorm(cfg.hidden)
        self.attn = Attention(cfg)
        self.mlp_norm = nn.RMSNorm(cfg.hidden)
        self.mlp = Mlp(cfg)

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        hidden = hidden + self.attn(self.attn_norm(hidden))
        return hidden + self.mlp(self.mlp_norm(hidden))


class TinyDecoder(nn.Module):
    """Pre-norm causal decoder; returns final hidden states."""

    def __init__(self, cfg: DecoderConfig) -> None:
        super().__init__()
        self.config = cfg
        self.embed = nn.Embedding(cfg.vocab_size, cfg.hidden)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.layers))
        self.final_norm = nn.RMSNorm(cfg.hidden)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        hidden = self.embed(token_ids)
        for block in self.blocks:
            hidden = block(hidden)
        return self.final_norm(hidden)


def build_tiny(seed: int = 0, cfg: DecoderConfig | None = None) -> TinyDecoder:
    """Deterministic randomly-initialized decoder (same seed → same weights)."""
    cfg = cfg or DecoderConfig()
    generator = torch.Generator().manual_seed(seed)
    model = TinyDecoder(cfg)
    with torch.no_grad():
        for parameter in model.parameters():
            parameter.copy_(
                torch.normal(0.0, 0.02, parameter.shape, generator=generator)
            )
    return model.eval()


def save_checkpoint(model: TinyDecoder, path: str | Path) -> None:
    """Write a single-file checkpoint ``load_model`` can restore."""
    torch.save(
        {"config": asdict(model.config), "state_dict": model.state_dict()}, path
    )


def load_model(identifier: str) -> TinyDecoder:
    """Resolve a model identifier.

    ``"tiny"`` or ``"tiny:<seed>"`` builds the deterministic random
    decoder; anything else is treated as a checkpoint path written by
    :func:`save_checkpoint`. The model runs in the checkpoint's dtype, so
    half-precision checkpoints produce half-precision activations.

    Raises:
        ModelLoadError: If the identifier is neither a tiny spec nor a
            loadable checkpoint.
    """
    from .run import ModelLoadError  # circular-free: run imports model lazily

    if identifier == "tiny" or identifier.startswith("tiny:"):
        _, _, seed_text = identifier.partition(":")
        try:
            seed = int(seed_text) if seed_text else 0
        except ValueError:
            raise ModelLoadError(
                f"bad tiny-model seed {seed_text!r} in {identifier!r}"
            ) from None
        return build_tiny(seed)

    path = Path(identifier)
    if not path.is_file():
        raise ModelLoadError(f"model {identifier!r} is not 'tiny[:seed]' or a checkpoint file")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
        cfg = DecoderConfig(**payload["config"])
        state = payload["state_dict"]
        model = TinyDecoder(cfg)
        dtype = next(iter(state.values())).dtype
        model = model.to(dtype)
        model.load_state_dict(state)
    except ModelLoadError:
        raise
    except Exception as exc:
        raise ModelLoadError(f"could not load checkpoint {identifier!r}: {exc}") from exc
    return model.eval()
