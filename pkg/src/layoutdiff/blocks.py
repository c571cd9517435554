"""Shared transformer building blocks.

All sequence models in the package are non-autoregressive pre-norm
transformer encoders without positional encoding: element coordinates and
guideline positions are explicit input features, so order carries no extra
information.
"""
from __future__ import annotations

import math

import torch
from torch import nn


def sinusoidal_features(t: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    """Sinusoidal features of integer timesteps, shape (batch, dim)."""
    if t.ndim != 1:
        raise ValueError("t must be a 1-D tensor of timesteps")
    half = dim // 2
    freqs = torch.exp(
        -math.log(max_period) * torch.arange(half, dtype=torch.float64) / max(half, 1)
    ).to(t.device)
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    feats = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    if dim % 2 == 1:
        feats = torch.cat([feats, torch.zeros_like(feats[:, :1])], dim=-1)
    return feats


class EncoderBlock(nn.Module):
    """Pre-norm self-attention block with optional key padding mask."""

    def __init__(self, width: int, heads: int, mlp_width: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, mlp_width),
            nn.GELU(),
            nn.Linear(mlp_width, width),
        )

    def forward(self, x: torch.Tensor, key_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        h = self.ln1(x)
        attn_out, _ = self.attn(h, h, h, key_padding_mask=key_padding_mask, need_weights=False)
        x = x + attn_out
        return x + self.mlp(self.ln2(x))


class Encoder(nn.Module):
    """Stack of encoder blocks sharing one padding mask."""

    def __init__(self, layers: int, width: int, heads: int, mlp_width: int):
        super().__init__()
        self.blocks = nn.ModuleList(
            EncoderBlock(width, heads, mlp_width) for _ in range(layers)
        )

    def forward(self, x: torch.Tensor, key_padding_mask: torch.Tensor | None = None) -> torch.Tensor:
        for block in self.blocks:
            x = block(x, key_padding_mask)
        return x


def masked_mean(x: torch.Tensor, padding_mask: torch.Tensor | None) -> torch.Tensor:
    """Mean over unmasked sequence positions; padding_mask True marks padding."""
    if padding_mask is None:
        return x.mean(dim=1)
    keep = (~padding_mask).to(x.dtype)[:, :, None]
    denom = keep.sum(dim=1).clamp_min(1.0)
    return (x * keep).sum(dim=1) / denom
