"""First-stage VAE between one-hot layout space and the continuous latent space.

The encoder maps the (N, one_hot_width) layout matrix to per-element Gaussian
posteriors over z in R^(N x latent_dim); the decoder maps z back to per-slice
categorical logits. Both are non-autoregressive transformer encoders with no
positional encoding, so invalid padding slots are represented faithfully and
the latent space supports always generating all N slots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from layoutdiff.blocks import Encoder
from layoutdiff.layouts import Layout, encode_one_hot
from layoutdiff.schema import AttributeSchema


class VaeError(ValueError):
    pass


@dataclass(frozen=True)
class VaeConfig:
    latent_dim: int = 8
    width: int = 512
    heads: int = 8
    layers: int = 4
    mlp_width: int = 2048
    kl_weight: float = 1e-2

    def __post_init__(self):
        if self.latent_dim < 1 or self.width < self.heads or self.width % self.heads:
            raise VaeError("invalid VAE dimensions")
        if self.kl_weight < 0:
            raise VaeError("kl_weight must be non-negative")

    @classmethod
    def desk(cls, latent_dim: int = 8) -> "VaeConfig":
        return cls(latent_dim=latent_dim, width=128, heads=4, layers=2, mlp_width=256)


class LayoutVae(nn.Module):
    def __init__(self, schema: AttributeSchema, config: VaeConfig):
        super().__init__()
        self.schema = schema
        self.config = config
        w = config.width
        self.in_proj = nn.Linear(schema.one_hot_width, w)
        self.encoder = Encoder(config.layers, w, config.heads, config.mlp_width)
        self.enc_norm = nn.LayerNorm(w)
        self.enc_out = nn.Linear(w, 2 * config.latent_dim)
        self.dec_in = nn.Linear(config.latent_dim, w)
        self.decoder = Encoder(config.layers, w, config.heads, config.mlp_width)
        self.dec_norm = nn.LayerNorm(w)
        self.dec_out = nn.Linear(w, schema.one_hot_width)

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Posterior parameters (mean, logvar), each (batch, N, latent_dim)."""
        if x.shape[-2:] != (self.schema.element_capacity, self.schema.one_hot_width):
            raise VaeError(f"expected (*, {self.schema.element_capacity}, {self.schema.one_hot_width}) input")
        h = self.encoder(self.in_proj(x))
        out = self.enc_out(self.enc_norm(h))
        mean, logvar = out.chunk(2, dim=-1)
        return mean, logvar

    def decode_logits(self, z: torch.Tensor) -> torch.Tensor:
        if not torch.isfinite(z).all():
            raise VaeError("latent input contains non-finite values")
        h = self.decoder(self.dec_in(z))
        return self.dec_out(self.dec_norm(h))

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        """Per-attribute probability simplexes, shape (batch, N, one_hot_width)."""
        logits = self.decode_logits(z)
        pieces = []
        for lo, hi in self.schema.slot_slices:
            pieces.append(torch.softmax(logits[..., lo:hi], dim=-1))
        return torch.cat(pieces, dim=-1)


def layouts_to_tensor(layouts: list[Layout]) -> torch.Tensor:
    return torch.from_numpy(np.stack([encode_one_hot(l) for l in layouts]))


def vae_encode(model: LayoutVae, layout: Layout) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (mean, logvar) of one layout, each (N, latent_dim)."""
    if layout.schema != model.schema:
        raise VaeError("layout schema does not match the model schema")
    with torch.no_grad():
        mean, logvar = model.encode(layouts_to_tensor([layout]))
    return mean[0].numpy(), logvar[0].numpy()


def vae_decode(model: LayoutVae, z: np.ndarray) -> np.ndarray:
    """Soft one-hot matrix (N, one_hot_width) for a single latent sequence."""
    with torch.no_grad():
        probs = model.decode(torch.as_tensor(z, dtype=next(model.parameters()).dtype)[None])
    return probs[0].numpy()


def reconstruction_loss(
    schema: AttributeSchema, logits: torch.Tensor, target: torch.Tensor
) -> torch.Tensor:
    """Mean per-attribute cross-entropy over every slot, invalid ones included."""
    losses = []
    for lo, hi in schema.slot_slices:
        piece = logits[..., lo:hi]
        idx = target[..., lo:hi].argmax(dim=-1)
        losses.append(
            nn.functional.cross_entropy(
                piece.reshape(-1, hi - lo), idx.reshape(-1), reduction="mean"
            )
        )
    return torch.stack(losses).mean()


def gaussian_kl(mean: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(q || N(0, I)) with mean reduction over batch, slots, and latent dims."""
    return 0.5 * (mean.pow(2) + logvar.exp() - logvar - 1.0).mean()


def vae_loss(
    model,
    layouts,
    kl_weight: float | None = None,
    generator: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(total, reconstruction, kl) with reparameterized posterior sampling.

    Accepts a Layout, a list of layouts, or a prebuilt one-hot tensor.
    """
    if isinstance(layouts, Layout):
        layouts = [layouts]
    if isinstance(layouts, torch.Tensor):
        x = layouts
    else:
        x = layouts_to_tensor(layouts)
    x = x.to(next(model.parameters()).dtype) if isinstance(model, nn.Module) else x
    if kl_weight is None:
        kl_weight = getattr(getattr(model, "config", None), "kl_weight", 1e-2)
    mean, logvar = model.encode(x)
    noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
    z = mean + (0.5 * logvar).exp() * noise
    logits = model.decode_logits(z)
    recon = reconstruction_loss(model.schema, logits, x)
    kl = gaussian_kl(mean, logvar)
    return recon + kl_weight * kl, recon, kl


def encode_means(model: LayoutVae, layouts: list[Layout], batch_size: int = 256) -> torch.Tensor:
    """Posterior means for a layout list, evaluation mode (no sampling)."""
    chunks = []
    with torch.no_grad():
        for i in range(0, len(layouts), batch_size):
            x = layouts_to_tensor(layouts[i : i + batch_size])
            x = x.to(next(model.parameters()).dtype)
            chunks.append(model.encode(x)[0])
    return torch.cat(chunks) if chunks else torch.zeros(0)


def hard_one_hot(schema: AttributeSchema, probs: np.ndarray) -> np.ndarray:
    """Collapse per-slice probabilities to an exact one-hot matrix."""
    out = np.zeros_like(probs, dtype=np.float32)
    for lo, hi in schema.slot_slices:
        idx = probs[..., lo:hi].argmax(axis=-1)
        np.put_along_axis(out[..., lo:hi], idx[..., None], 1.0, axis=-1)
    return out
