"""Noise-prediction network, forward process, and the diffusion training loss.

The denoiser consumes each condition through exactly one route: the given
design is concatenated along the element axis (the sequence becomes 2N
tokens and the prediction is read from the first N), the timestep and the
pooled prompt embedding modulate every block through a zero-initialized
feature-wise affine, and the sequential prompt, class-count, and guideline
tokens join the sequence as extra keys/values of a joint attention.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from layoutdiff.blocks import sinusoidal_features
from layoutdiff.encoders import EncodedConditions
from layoutdiff.schema import AttributeSchema


class DenoiserError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Forward process


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    timesteps: np.ndarray = field(default=None)  # model-time value per step

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        object.__setattr__(self, "betas", betas)
        if betas.ndim != 1 or len(betas) < 1:
            raise DenoiserError("betas must be a non-empty vector")
        if not ((betas > 0) & (betas < 1)).all():
            raise DenoiserError("betas must lie strictly in (0, 1)")
        alphas = 1.0 - betas
        alpha_bars = np.cumprod(alphas)
        if not (np.diff(alpha_bars) < 0).all():
            raise DenoiserError("alpha_bar must be strictly decreasing")
        if alpha_bars[0] < 0.95:
            raise DenoiserError("alpha_bar must start near 1")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)
        if self.timesteps is None:
            object.__setattr__(self, "timesteps", np.arange(len(betas)))
        else:
            ts = np.asarray(self.timesteps, dtype=np.int64)
            if ts.shape != betas.shape:
                raise DenoiserError("timesteps must align with betas")
            object.__setattr__(self, "timesteps", ts)

    @property
    def T(self) -> int:
        return len(self.betas)

    @classmethod
    def linear(cls, T: int = 1000, beta_start: float | None = None, beta_end: float | None = None) -> "NoiseSchedule":
        """Linear betas; defaults scale the 1e-4..0.02 ramp by 1000/T."""
        scale = 1000.0 / T
        beta_start = beta_start if beta_start is not None else 1e-4 * scale
        beta_end = beta_end if beta_end is not None else 0.02 * scale
        return cls(np.linspace(beta_start, beta_end, T))

    def respace(self, steps: int) -> "NoiseSchedule":
        """Evenly spaced sub-schedule preserving the original timestep values.

        The selection always keeps both endpoints, so the respaced chain still
        starts from the terminal noise level; a 1-step chain cannot do that
        and is rejected.
        """
        if steps == self.T:
            return self
        if not 2 <= steps <= self.T:
            raise DenoiserError(f"steps must lie in [2, {self.T}]")
        idx = np.unique(np.round(np.linspace(0, self.T - 1, steps)).astype(np.int64))
        bars = self.alpha_bars[idx]
        prev = np.concatenate([[1.0], bars[:-1]])
        betas = 1.0 - bars / prev
        return NoiseSchedule(betas, timesteps=self.timesteps[idx])

    def posterior_variance(self, s: int) -> float:
        """Variance of q(z_{s-1} | z_s, z_0) at schedule index s."""
        prev = self.alpha_bars[s - 1] if s > 0 else 1.0
        return float(self.betas[s] * (1.0 - prev) / (1.0 - self.alpha_bars[s]))

    def to_json(self) -> dict:
        return {"betas": self.betas.tolist(), "timesteps": self.timesteps.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "NoiseSchedule":
        return cls(np.asarray(obj["betas"]), timesteps=np.asarray(obj["timesteps"]))


def q_sample(
    schedule: NoiseSchedule, z0: torch.Tensor, t, noise: torch.Tensor
) -> torch.Tensor:
    """Forward noising: sqrt(ab_t) z0 + sqrt(1 - ab_t) noise."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if ((t_arr < 0) | (t_arr >= schedule.T)).any():
        raise DenoiserError(f"t out of range [0, {schedule.T})")
    ab = torch.as_tensor(schedule.alpha_bars[t_arr], dtype=z0.dtype)
    if len(t_arr) == 1:
        ab = ab.reshape((1,) * z0.ndim)
    else:
        ab = ab.reshape((-1,) + (1,) * (z0.ndim - 1))
    return ab.sqrt() * z0 + (1.0 - ab).sqrt() * noise


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class DenoiserConfig:
    width: int = 512
    heads: int = 8
    layers: int = 4
    mlp_width: int = 2048
    positional_encoding: bool = False

    def __post_init__(self):
        if self.width < self.heads or self.width % self.heads:
            raise DenoiserError("width must be a positive multiple of heads")

    @classmethod
    def desk(cls) -> "DenoiserConfig":
        return cls(width=128, heads=4, layers=2, mlp_width=256)


class JointBlock(nn.Module):
    """FiLM-modulated block whose attention keys/values include condition tokens."""

    def __init__(self, width: int, heads: int, mlp_width: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(width, elementwise_affine=False)
        self.film = nn.Linear(width, 2 * width)
        nn.init.zeros_(self.film.weight)
        nn.init.zeros_(self.film.bias)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, mlp_width),
            nn.GELU(),
            nn.Linear(mlp_width, width),
        )

    def forward(
        self,
        x: torch.Tensor,
        cond_kv: torch.Tensor,
        cond_mask: torch.Tensor,
        film_src: torch.Tensor,
    ) -> torch.Tensor:
        gamma, beta = self.film(film_src).chunk(2, dim=-1)
        h = self.ln1(x) * (1.0 + gamma[:, None]) + beta[:, None]
        kv = torch.cat([h, cond_kv], dim=1)
        mask = torch.cat(
            [torch.zeros(x.shape[0], x.shape[1], dtype=torch.bool), cond_mask], dim=1
        )
        attn_out, _ = self.attn(h, kv, kv, key_padding_mask=mask, need_weights=False)
        x = x + attn_out
        return x + self.mlp(self.ln2(x))


class Denoiser(nn.Module):
    """epsilon prediction over the latent sequence, conditioned three ways."""

    def __init__(self, schema: AttributeSchema, latent_dim: int, config: DenoiserConfig):
        super().__init__()
        self.schema = schema
        self.latent_dim = latent_dim
        self.config = config
        w = config.width
        self.in_proj = nn.Linear(latent_dim, w)
        self.time_mlp = nn.Sequential(nn.Linear(w, w), nn.SiLU(), nn.Linear(w, w))
        if config.positional_encoding:
            self.pos_embed = nn.Parameter(torch.randn(2 * schema.element_capacity, w) * 0.02)
        else:
            self.pos_embed = None
        self.blocks = nn.ModuleList(
            JointBlock(w, config.heads, config.mlp_width) for _ in range(config.layers)
        )
        self.out_norm = nn.LayerNorm(w)
        self.out_proj = nn.Linear(w, latent_dim)
        nn.init.zeros_(self.out_proj.weight)
        nn.init.zeros_(self.out_proj.bias)
        self.forward_count = 0

    def forward(self, z_t: torch.Tensor, enc: EncodedConditions, t: torch.Tensor) -> torch.Tensor:
        n = self.schema.element_capacity
        if z_t.ndim != 3 or z_t.shape[1:] != (n, self.latent_dim):
            raise DenoiserError(f"expected z_t of shape (batch, {n}, {self.latent_dim})")
        if enc.given_emb.shape[-1] != self.config.width:
            raise DenoiserError("condition width does not match the denoiser width")
        self.forward_count += 1
        t = torch.as_tensor(t, dtype=torch.long).reshape(-1)
        if len(t) == 1 and z_t.shape[0] > 1:
            t = t.expand(z_t.shape[0])

        x = torch.cat([self.in_proj(z_t), enc.given_emb.to(z_t.dtype)], dim=1)
        if self.pos_embed is not None:
            x = x + self.pos_embed[None].to(z_t.dtype)
        t_feat = sinusoidal_features(t, self.config.width).to(z_t.dtype)
        film_src = self.time_mlp(t_feat) + enc.prompt_pool.to(z_t.dtype)
        cond_kv, cond_mask = enc.cond_tokens()
        cond_kv = cond_kv.to(z_t.dtype)
        for block in self.blocks:
            x = block(x, cond_kv, cond_mask, film_src)
        return self.out_proj(self.out_norm(x[:, :n]))


def predict_noise(
    model: Denoiser, z_t: torch.Tensor, enc: EncodedConditions, t
) -> torch.Tensor:
    return model(z_t, enc, torch.as_tensor(t, dtype=torch.long).reshape(-1))


def diffusion_loss(
    model,
    schedule: NoiseSchedule,
    z0: torch.Tensor,
    enc: EncodedConditions,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """MSE between true and predicted noise at uniformly sampled timesteps."""
    if z0.ndim != 3:
        raise DenoiserError("z0 must be (batch, N, latent_dim)")
    b = z0.shape[0]
    t = torch.randint(0, schedule.T, (b,), generator=generator)
    noise = torch.randn(z0.shape, generator=generator, dtype=z0.dtype)
    z_t = q_sample(schedule, z0, t.numpy(), noise)
    pred = model(z_t, enc, t)
    return ((noise - pred) ** 2).mean()
