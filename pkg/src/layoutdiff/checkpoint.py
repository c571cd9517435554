"""Versioned checkpoint containers for the two training stages.

Checkpoints are torch-serialized dictionaries carrying the schema (by value
and by hash), the model configurations, parameter tensors, and training
extras such as the optimizer state and step counter. Loading refuses files
whose schema hash does not match the requested schema.
"""
from __future__ import annotations

from dataclasses import asdict

import torch

from layoutdiff.denoiser import Denoiser, DenoiserConfig, NoiseSchedule
from layoutdiff.encoders import ConditionEncoders, Vocab
from layoutdiff.sampler import DiffusionBundle
from layoutdiff.schema import AttributeSchema
from layoutdiff.vae import LayoutVae, VaeConfig

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _base_blob(kind: str, schema: AttributeSchema, step: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "schema": schema.to_json(),
        "schema_hash": schema.hash(),
        "step": int(step),
    }


def _check_blob(blob: dict, kind: str, expected_schema: AttributeSchema | None) -> AttributeSchema:
    if blob.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {blob.get('format_version')!r}")
    if blob.get("kind") != kind:
        raise CheckpointError(f"expected a {kind!r} checkpoint, found {blob.get('kind')!r}")
    schema = AttributeSchema.from_json(blob["schema"])
    if schema.hash() != blob["schema_hash"]:
        raise CheckpointError("checkpoint schema does not match its recorded hash")
    if expected_schema is not None and expected_schema.hash() != blob["schema_hash"]:
        raise CheckpointError(
            f"checkpoint was trained for schema {schema.name!r} "
            f"(hash {blob['schema_hash'][:12]}), not {expected_schema.name!r} "
            f"(hash {expected_schema.hash()[:12]})"
        )
    return schema


def save_vae_checkpoint(
    path,
    vae: LayoutVae,
    step: int = 0,
    optimizer: torch.optim.Optimizer | None = None,
) -> None:
    blob = _base_blob("vae", vae.schema, step)
    blob["config"] = asdict(vae.config)
    blob["state"] = vae.state_dict()
    blob["optimizer"] = optimizer.state_dict() if optimizer is not None else None
    torch.save(blob, path)


def load_vae_checkpoint(
    path, expected_schema: AttributeSchema | None = None
) -> tuple[LayoutVae, dict]:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    schema = _check_blob(blob, "vae", expected_schema)
    vae = LayoutVae(schema, VaeConfig(**blob["config"]))
    vae.load_state_dict(blob["state"])
    extras = {"step": blob["step"], "optimizer": blob.get("optimizer")}
    return vae, extras


def save_diffusion_checkpoint(
    path,
    bundle: DiffusionBundle,
    step: int = 0,
    optimizer: torch.optim.Optimizer | None = None,
    policy: dict | None = None,
) -> None:
    enc = bundle.encoders
    blob = _base_blob("diffusion", bundle.schema, step)
    blob["vae_config"] = asdict(bundle.vae.config)
    blob["denoiser_config"] = asdict(bundle.denoiser.config)
    blob["encoder_heads"] = enc.class_enc.encoder.blocks[0].attn.num_heads
    blob["encoder_mlp_width"] = enc.class_enc.encoder.blocks[0].mlp[0].out_features
    blob["max_prompt_tokens"] = enc.max_prompt_tokens
    blob["vocab"] = enc.vocab.to_lines()
    blob["encoders_state"] = enc.state_dict()  # includes the frozen VAE
    blob["denoiser_state"] = bundle.denoiser.state_dict()
    blob["schedule"] = bundle.schedule.to_json()
    blob["latent_scale"] = float(bundle.latent_scale)
    blob["optimizer"] = optimizer.state_dict() if optimizer is not None else None
    blob["policy"] = dict(policy or {})
    torch.save(blob, path)


def load_diffusion_checkpoint(
    path, expected_schema: AttributeSchema | None = None
) -> tuple[DiffusionBundle, dict]:
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    schema = _check_blob(blob, "diffusion", expected_schema)
    vae = LayoutVae(schema, VaeConfig(**blob["vae_config"]))
    denoiser_config = DenoiserConfig(**blob["denoiser_config"])
    vocab = Vocab.from_lines(blob["vocab"])
    encoders = ConditionEncoders(
        schema,
        vae,
        vocab,
        width=denoiser_config.width,
        heads=blob["encoder_heads"],
        mlp_width=blob["encoder_mlp_width"],
        max_prompt_tokens=blob["max_prompt_tokens"],
    )
    encoders.load_state_dict(blob["encoders_state"])
    denoiser = Denoiser(schema, vae.config.latent_dim, denoiser_config)
    denoiser.load_state_dict(blob["denoiser_state"])
    bundle = DiffusionBundle(
        schema=schema,
        encoders=encoders,
        denoiser=denoiser,
        schedule=NoiseSchedule.from_json(blob["schedule"]),
        latent_scale=blob["latent_scale"],
    ).eval_mode()
    extras = {
        "step": blob["step"],
        "optimizer": blob.get("optimizer"),
        "policy": blob.get("policy", {}),
    }
    return bundle, extras
