"""Ancestral sampling with multi-weight classifier-free guidance.

Present conditions are sorted by ascending guidance weight into C_1..C_L and
the guided prediction is

    eps_hat = (1 + w_1) eps(C_1..C_L) - w_1 eps()
              + sum_{i=2..L} (w_i - w_{i-1}) (eps(C_i..C_L) - eps())

where eps(C_i..C_L) nulls the conditions with smaller weights. Each step costs
exactly L + 1 network evaluations. Equal weights make the correction terms
vanish, so ties are broken by a fixed condition order purely for determinism.
"""
from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field

import numpy as np
import torch

from layoutdiff.conditions import CONDITION_NAMES, ConditionSet
from layoutdiff.denoiser import Denoiser, NoiseSchedule
from layoutdiff.encoders import ConditionEncoders, EncodedConditions
from layoutdiff.layouts import Layout, decode_one_hot, sort_canonical
from layoutdiff.rng import derive_seed
from layoutdiff.schema import AttributeSchema
from layoutdiff.vae import LayoutVae, hard_one_hot


class SamplerError(ValueError):
    pass


CONDITION_LETTERS = {
    "guidelines": "G",
    "given_design": "E",
    "class_count": "C",
    "prompt": "P",
}
_LETTER_ORDER = ("guidelines", "given_design", "class_count", "prompt")


def combination_key(present: tuple[str, ...]) -> str:
    """Preset table key for a set of present conditions, e.g. "G+E+C+P"."""
    return "+".join(CONDITION_LETTERS[name] for name in _LETTER_ORDER if name in present)


@dataclass(frozen=True)
class GuidanceConfig:
    """Per-condition guidance weights plus sampling steps and seed."""

    weights: dict[str, float] = field(default_factory=dict)
    steps: int | None = None
    seed: int = 0

    def __post_init__(self):
        for name, w in self.weights.items():
            if name not in CONDITION_NAMES:
                raise SamplerError(f"unknown condition {name!r} in guidance weights")
            if w < 0:
                raise SamplerError("guidance weights must be non-negative")
        if self.steps is not None and self.steps < 2:
            raise SamplerError("steps must be at least 2")

    def for_present(self, present: tuple[str, ...]) -> list[tuple[str, float]]:
        """Present conditions sorted by ascending weight, ties in fixed order."""
        missing = [n for n in present if n not in self.weights]
        if missing:
            raise SamplerError(f"no guidance weight for present conditions {missing}")
        return sorted(
            ((n, float(self.weights[n])) for n in present),
            key=lambda kv: (kv[1], CONDITION_NAMES.index(kv[0])),
        )


def guided_noise(
    model: Denoiser,
    encoders: ConditionEncoders,
    z_t: torch.Tensor,
    enc: EncodedConditions,
    t,
    sorted_weights: list[tuple[str, float]],
) -> torch.Tensor:
    """Multi-weight classifier-free guidance; exactly L+1 model evaluations."""
    for name, _ in sorted_weights:
        if not bool(enc.flags[name].all()):
            raise SamplerError(f"guidance weight given for absent condition {name!r}")
    if not sorted_weights:
        return model(z_t, enc, t)

    names = [n for n, _ in sorted_weights]
    ws = [w for _, w in sorted_weights]
    uncond = encoders.null_out(enc, CONDITION_NAMES)
    eps_uncond = model(z_t, uncond, t)
    total = -ws[-1] * eps_uncond
    for i, (name, w) in enumerate(sorted_weights):
        variant = encoders.null_out(enc, names[:i]) if i else enc
        eps_i = model(z_t, variant, t)
        coeff = (1.0 + ws[0]) if i == 0 else (ws[i] - ws[i - 1])
        total = total + coeff * eps_i
    return total


@dataclass
class DiffusionBundle:
    """Everything sampling needs: models, schedule, and latent normalization."""

    schema: AttributeSchema
    encoders: ConditionEncoders
    denoiser: Denoiser
    schedule: NoiseSchedule
    latent_scale: float = 1.0

    def __post_init__(self):
        if self.encoders.width != self.denoiser.config.width:
            raise SamplerError("encoder and denoiser widths differ")
        if self.latent_scale <= 0:
            raise SamplerError("latent_scale must be positive")

    @property
    def vae(self) -> LayoutVae:
        return self.encoders.vae

    def eval_mode(self) -> "DiffusionBundle":
        self.encoders.eval()
        self.denoiser.eval()
        return self


def _decode_latents(bundle: DiffusionBundle, z: torch.Tensor) -> list[Layout]:
    with torch.no_grad():
        probs = bundle.vae.decode(z * bundle.latent_scale)
    layouts = []
    for row in probs.numpy():
        matrix = hard_one_hot(bundle.schema, row)
        layouts.append(sort_canonical(decode_one_hot(bundle.schema, matrix)))
    return layouts


def _sample_group(
    bundle: DiffusionBundle,
    cs_list: list[ConditionSet],
    gc: GuidanceConfig,
    item_seeds: list[int],
) -> list[Layout]:
    schema = bundle.schema
    latent_dim = bundle.vae.config.latent_dim
    n = schema.element_capacity
    schedule = bundle.schedule.respace(gc.steps) if gc.steps else bundle.schedule

    present = cs_list[0].present_names
    sorted_weights = gc.for_present(present)
    enc = bundle.encoders.assemble(cs_list)

    gens = [torch.Generator().manual_seed(s) for s in item_seeds]
    z = torch.stack(
        [torch.randn(n, latent_dim, generator=g, dtype=torch.float32) for g in gens]
    )
    with torch.no_grad():
        for s in range(schedule.T - 1, -1, -1):
            t_model = torch.full((len(cs_list),), int(schedule.timesteps[s]), dtype=torch.long)
            eps_hat = guided_noise(bundle.denoiser, bundle.encoders, z, enc, t_model, sorted_weights)
            alpha = float(schedule.alphas[s])
            ab = float(schedule.alpha_bars[s])
            mean = (z - (1.0 - alpha) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(alpha)
            if s > 0:
                sigma = np.sqrt(schedule.posterior_variance(s))
                noise = torch.stack(
                    [torch.randn(n, latent_dim, generator=g, dtype=torch.float32) for g in gens]
                )
                z = mean + sigma * noise
            else:
                z = mean
    return _decode_latents(bundle, z)


def sample(bundle: DiffusionBundle, cs: ConditionSet, gc: GuidanceConfig) -> Layout:
    """One layout, deterministic under gc.seed."""
    _validate_conditions(bundle.schema, cs)
    return _sample_group(bundle, [cs], gc, [gc.seed])[0]


def sample_batch(
    bundle: DiffusionBundle, cs_list: list[ConditionSet], gc: GuidanceConfig
) -> list[Layout]:
    """Batched sampling; item i reproduces sample() with seed derive_seed(gc.seed, i).

    Items are grouped by condition-presence pattern so every group shares one
    guidance variant set; per-item noise generators keep results independent
    of the grouping.
    """
    for cs in cs_list:
        _validate_conditions(bundle.schema, cs)
    groups: dict[tuple[str, ...], list[int]] = {}
    for i, cs in enumerate(cs_list):
        groups.setdefault(cs.present_names, []).append(i)
    results: list[Layout | None] = [None] * len(cs_list)
    for pattern, idx in groups.items():
        layouts = _sample_group(
            bundle,
            [cs_list[i] for i in idx],
            gc,
            [derive_seed(gc.seed, i) for i in idx],
        )
        for i, layout in zip(idx, layouts):
            results[i] = layout
    return list(results)


def _validate_conditions(schema: AttributeSchema, cs: ConditionSet) -> None:
    if cs.class_count is not None and len(cs.class_count) != schema.num_classes:
        raise SamplerError("class_count length does not match the schema")
    if cs.given_design is not None and cs.given_design.schema != schema:
        raise SamplerError("given design schema does not match the model")
    for g in cs.guidelines or ():
        if not 0 <= g.position < schema.resolution:
            raise SamplerError(f"guideline position {g.position} out of range")


# ---------------------------------------------------------------------------
# Guidance presets


def _builtin_presets() -> dict:
    text = importlib.resources.files("layoutdiff").joinpath("presets/guidance.json").read_text()
    return json.loads(text)


def resolve_guidance(preset: str, present: tuple[str, ...]) -> dict[str, float]:
    """Map a preset specifier to per-condition weights for the present set.

    Accepted forms: "single:W" (uniform weight W), a named table ("clay",
    "c4") resolved by the present-condition combination, the "-all" aliases
    for each table's full row, or a path to a JSON file holding either a
    combination-keyed table or a flat weights object.
    """
    if preset.startswith("single:"):
        try:
            w = float(preset.split(":", 1)[1])
        except ValueError as exc:
            raise SamplerError(f"bad single preset {preset!r}") from exc
        return {name: w for name in present}

    tables = _builtin_presets()
    if preset in tables:
        if not present:
            return {}
        key = combination_key(present)
        row = tables[preset].get(key)
        if row is None:
            raise SamplerError(f"preset {preset!r} has no row for combination {key!r}")
        return {name: float(row[CONDITION_LETTERS[name]]) for name in present}
    if preset.endswith("-all") and preset[:-4] in tables:
        row = tables[preset[:-4]]["G+E+C+P"]
        return {name: float(row[CONDITION_LETTERS[name]]) for name in present}

    import os

    if os.path.exists(preset):
        with open(preset) as f:
            data = json.load(f)
        if all(isinstance(v, dict) for v in data.values()):
            key = combination_key(present)
            row = data.get(key)
            if row is None:
                raise SamplerError(f"preset file has no row for combination {key!r}")
            return {name: float(row[CONDITION_LETTERS[name]]) for name in present}
        return {name: float(data[name]) for name in present if name in data}
    raise SamplerError(f"unknown guidance preset {preset!r}")
