"""Two-stage training: the layout VAE, then the conditional denoiser.

Stage one trains the VAE with subset augmentation so partial layouts (the
given-design condition) encode well. Stage two freezes the VAE, normalizes
latents by the corpus latent scale, rebuilds each batch's conditions by
extraction plus random subsetting plus hierarchical dropout, and optimizes
the denoiser jointly with the condition encoders.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from layoutdiff.conditions import (
    ConditionSet,
    DropoutPolicy,
    Prompt,
    apply_dropout,
    extract_guidelines,
    sample_guidelines,
    subset_given_design,
)
from layoutdiff.denoiser import Denoiser, DenoiserConfig, NoiseSchedule, diffusion_loss
from layoutdiff.encoders import ConditionEncoders, Vocab
from layoutdiff.layouts import Layout, count_classes, encode_one_hot
from layoutdiff.rng import derive_seed, rng_from
from layoutdiff.sampler import DiffusionBundle
from layoutdiff.schema import AttributeSchema
from layoutdiff.vae import LayoutVae, VaeConfig, encode_means, vae_loss

ADAM_BETAS = (0.9, 0.98)


class TrainingError(RuntimeError):
    pass


def _log(history: list[dict], entry: dict, log_file) -> None:
    history.append(entry)
    if log_file is not None:
        log_file.write(json.dumps(entry) + "\n")
        log_file.flush()


@dataclass(frozen=True)
class VaeTrainConfig:
    steps: int = 1500
    batch_size: int = 64
    lr: float = 2e-3
    subset_prob: float = 0.5
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.lr <= 0:
            raise TrainingError("invalid VAE training configuration")


def train_vae(
    schema: AttributeSchema,
    layouts: list[Layout],
    vae_config: VaeConfig,
    config: VaeTrainConfig,
    log_path=None,
    resume: tuple[LayoutVae, dict] | None = None,
) -> tuple[LayoutVae, list[dict]]:
    """Train the first-stage VAE; returns the model and the loss history."""
    if not layouts:
        raise TrainingError("cannot train on an empty corpus")
    if resume is None:
        torch.manual_seed(derive_seed(config.seed, 0xAE))
        vae = LayoutVae(schema, vae_config)
        start_step = 0
        opt_state = None
    else:
        vae, extras = resume
        start_step = extras.get("step", 0)
        opt_state = extras.get("optimizer")
    vae.train()
    optimizer = torch.optim.Adam(vae.parameters(), lr=config.lr, betas=ADAM_BETAS)
    if opt_state is not None:
        optimizer.load_state_dict(opt_state)

    base = np.stack([encode_one_hot(l) for l in layouts])
    rng = rng_from(config.seed, 1)
    history: list[dict] = []
    log_file = open(log_path, "a") if log_path is not None else None
    try:
        for step in range(start_step, start_step + config.steps):
            idx = rng.integers(len(layouts), size=config.batch_size)
            rows = []
            for j, i in enumerate(idx):
                if rng.random() < config.subset_prob and layouts[i].num_valid > 0:
                    sub = subset_given_design(
                        layouts[i], float(rng.random()), derive_seed(config.seed, step, j)
                    )
                    rows.append(encode_one_hot(sub))
                else:
                    rows.append(base[i])
            x = torch.from_numpy(np.stack(rows))
            gen = torch.Generator().manual_seed(derive_seed(config.seed, 2, step))
            total, recon, kl = vae_loss(vae, x, vae_config.kl_weight, gen)
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            if (step - start_step) % config.log_every == 0 or step == start_step + config.steps - 1:
                _log(
                    history,
                    {
                        "step": step,
                        "total": float(total.detach()),
                        "recon": float(recon.detach()),
                        "kl": float(kl.detach()),
                    },
                    log_file,
                )
    finally:
        if log_file is not None:
            log_file.close()
    vae.eval()
    return vae, history


def latent_scale_of(vae: LayoutVae, layouts: list[Layout]) -> float:
    """Global standard deviation of posterior means over the corpus."""
    means = encode_means(vae, layouts)
    scale = float(means.std())
    if not np.isfinite(scale) or scale <= 0:
        raise TrainingError("degenerate latent scale; VAE training likely failed")
    return scale


@dataclass(frozen=True)
class DiffusionTrainConfig:
    steps: int = 3000
    batch_size: int = 64
    lr: float = 1e-3
    timesteps: int = 100
    p_cfg: float = 0.1
    p_cond: float = 0.5
    guideline_p_base: float = 0.5
    seed: int = 0
    log_every: int = 50
    vocab_size: int = 2048
    max_prompt_tokens: int = 64
    encoder_heads: int = 4
    encoder_mlp_width: int = 256

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.lr <= 0 or self.timesteps < 1:
            raise TrainingError("invalid diffusion training configuration")


def build_training_conditions(
    layout: Layout,
    prompt: Prompt,
    policy: DropoutPolicy,
    p_base: float,
    seed: int,
) -> ConditionSet:
    """Extract, subset, and drop out one training example's conditions."""
    rng = rng_from(seed)
    given = subset_given_design(layout, float(rng.random()), derive_seed(seed, 0))
    guidelines = sample_guidelines(
        extract_guidelines(layout), p_base, derive_seed(seed, 1)
    )
    cs = ConditionSet(
        prompt=prompt,
        class_count=tuple(int(c) for c in count_classes(layout)),
        given_design=given if given.num_valid > 0 else None,
        guidelines=guidelines if guidelines else None,
    )
    return apply_dropout(cs, policy, rng)


def train_diffusion(
    schema: AttributeSchema,
    pairs: list[tuple[Layout, Prompt]],
    vae: LayoutVae,
    denoiser_config: DenoiserConfig,
    config: DiffusionTrainConfig,
    log_path=None,
    resume: tuple[DiffusionBundle, dict] | None = None,
) -> tuple[DiffusionBundle, list[dict]]:
    """Train the denoiser and condition encoders over a frozen VAE."""
    if not pairs:
        raise TrainingError("cannot train on an empty corpus")
    layouts = [p[0] for p in pairs]
    prompts = [p[1] for p in pairs]

    if resume is None:
        torch.manual_seed(derive_seed(config.seed, 0xD1F))
        vocab = Vocab.build(prompts, max_size=config.vocab_size)
        encoders = ConditionEncoders(
            schema,
            vae,
            vocab,
            width=denoiser_config.width,
            heads=config.encoder_heads,
            mlp_width=config.encoder_mlp_width,
            max_prompt_tokens=config.max_prompt_tokens,
        )
        denoiser = Denoiser(schema, vae.config.latent_dim, denoiser_config)
        schedule = NoiseSchedule.linear(config.timesteps)
        vae.eval()
        means = encode_means(vae, layouts)
        scale = float(means.std())
        if not np.isfinite(scale) or scale <= 0:
            raise TrainingError("degenerate latent scale; VAE training likely failed")
        bundle = DiffusionBundle(schema, encoders, denoiser, schedule, latent_scale=scale)
        start_step = 0
        opt_state = None
    else:
        bundle, extras = resume
        vae = bundle.vae
        vae.eval()
        means = encode_means(vae, layouts)
        start_step = extras.get("step", 0)
        opt_state = extras.get("optimizer")

    z_all = (means / bundle.latent_scale).to(torch.float32)
    policy = DropoutPolicy(p_cfg=config.p_cfg, p_cond=config.p_cond, seed=config.seed)

    bundle.encoders.train()
    bundle.denoiser.train()
    params = [
        p
        for p in list(bundle.encoders.parameters()) + list(bundle.denoiser.parameters())
        if p.requires_grad
    ]
    optimizer = torch.optim.Adam(params, lr=config.lr, betas=ADAM_BETAS)
    if opt_state is not None:
        optimizer.load_state_dict(opt_state)

    rng = rng_from(config.seed, 3)
    history: list[dict] = []
    log_file = open(log_path, "a") if log_path is not None else None
    try:
        for step in range(start_step, start_step + config.steps):
            idx = rng.integers(len(pairs), size=config.batch_size)
            batch_cs = [
                build_training_conditions(
                    layouts[i],
                    prompts[i],
                    policy,
                    config.guideline_p_base,
                    derive_seed(config.seed, 4, step, j),
                )
                for j, i in enumerate(idx)
            ]
            enc = bundle.encoders.assemble(batch_cs)
            z0 = z_all[torch.as_tensor(idx, dtype=torch.long)]
            gen = torch.Generator().manual_seed(derive_seed(config.seed, 5, step))
            loss = diffusion_loss(bundle.denoiser, bundle.schedule, z0, enc, gen)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            if (step - start_step) % config.log_every == 0 or step == start_step + config.steps - 1:
                _log(history, {"step": step, "loss": float(loss.detach())}, log_file)
    finally:
        if log_file is not None:
            log_file.close()
    bundle.eval_mode()
    return bundle, history
