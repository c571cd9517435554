"""Condition encoders and the assembled multi-condition embedding set.

Each condition stream is encoded to the denoiser query width. Absent
conditions are represented by learned null embeddings, one per stream, so a
condition dropped by classifier-free dropout and a condition nulled during
guidance produce byte-identical encodings: a single null token (the given
design, which rides the element axis, broadcasts its null over all N slots).
Variable-length streams carry key padding masks, which keeps batched encoding
exact regardless of how the rest of the batch pads.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import torch
from torch import nn

from layoutdiff.blocks import Encoder, masked_mean
from layoutdiff.conditions import CONDITION_NAMES, ConditionSet, Guideline, Prompt
from layoutdiff.schema import AttributeSchema
from layoutdiff.vae import LayoutVae, layouts_to_tensor


class EncoderError(ValueError):
    pass


class Vocab:
    """Token to id mapping; id 0 is the unknown token."""

    UNK = "<unk>"

    def __init__(self, tokens: tuple[str, ...]):
        if not tokens or tokens[0] != self.UNK:
            raise EncoderError("vocabulary must start with the unknown token")
        if len(set(tokens)) != len(tokens):
            raise EncoderError("vocabulary contains duplicates")
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, prompts: Sequence[Prompt], max_size: int = 4096) -> "Vocab":
        freq: dict[str, int] = {}
        for p in prompts:
            for tok in p.tokens():
                freq[tok] = freq.get(tok, 0) + 1
        ranked = sorted(freq, key=lambda t: (-freq[t], t))[: max_size - 1]
        return cls((cls.UNK, *sorted(ranked)))

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, 0) for t in tokens]

    def to_lines(self) -> str:
        return "\n".join(self.tokens)

    @classmethod
    def from_lines(cls, text: str) -> "Vocab":
        return cls(tuple(text.splitlines()))


class TinyTextEncoder(nn.Module):
    """Two-layer sequence encoder; the pooled embedding is a masked mean."""

    def __init__(self, vocab_size: int, width: int, heads: int, mlp_width: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size, width)
        self.encoder = Encoder(2, width, heads, mlp_width)
        self.norm = nn.LayerNorm(width)

    def forward(
        self, ids: torch.Tensor, padding_mask: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        seq = self.norm(self.encoder(self.embed(ids), padding_mask))
        return seq, masked_mean(seq, padding_mask)


class ClassCountEncoder(nn.Module):
    """One token per class: class embedding plus clipped-count embedding."""

    def __init__(self, num_classes: int, max_count: int, width: int, heads: int, mlp_width: int):
        super().__init__()
        self.max_count = max_count
        self.class_embed = nn.Embedding(num_classes, width)
        self.count_embed = nn.Embedding(max_count + 1, width)
        self.encoder = Encoder(2, width, heads, mlp_width)

    def forward(self, counts: torch.Tensor) -> torch.Tensor:
        if (counts < 0).any():
            raise EncoderError("class counts must be non-negative")
        counts = counts.clamp(max=self.max_count)
        classes = torch.arange(counts.shape[1], device=counts.device)
        tokens = self.class_embed(classes)[None] + self.count_embed(counts)
        return self.encoder(tokens)


class GuidelineEncoder(nn.Module):
    """Tokens are one-hot(axis) | one-hot(position), then a 2-layer encoder."""

    def __init__(self, resolution: int, width: int, heads: int, mlp_width: int):
        super().__init__()
        self.resolution = resolution
        self.in_proj = nn.Linear(2 + resolution, width)
        self.encoder = Encoder(2, width, heads, mlp_width)

    def featurize(self, guidelines: Sequence[Guideline], dtype: torch.dtype) -> torch.Tensor:
        feats = torch.zeros(len(guidelines), 2 + self.resolution, dtype=dtype)
        for i, g in enumerate(guidelines):
            if not 0 <= g.position < self.resolution:
                raise EncoderError(f"guideline position {g.position} out of range")
            feats[i, 0 if g.axis == "x" else 1] = 1.0
            feats[i, 2 + g.position] = 1.0
        return feats

    def forward(self, feats: torch.Tensor, padding_mask: torch.Tensor) -> torch.Tensor:
        return self.encoder(self.in_proj(feats), padding_mask)


@dataclass
class EncodedConditions:
    """Batched condition embeddings; masks use True for padding."""

    prompt_seq: torch.Tensor
    prompt_mask: torch.Tensor
    prompt_pool: torch.Tensor
    class_emb: torch.Tensor
    class_mask: torch.Tensor
    given_emb: torch.Tensor
    guideline_emb: torch.Tensor
    guideline_mask: torch.Tensor
    flags: dict[str, torch.Tensor]

    @property
    def batch_size(self) -> int:
        return self.prompt_seq.shape[0]

    def cond_tokens(self) -> tuple[torch.Tensor, torch.Tensor]:
        """Cross-attention memory: prompt, class, and guideline streams."""
        kv = torch.cat([self.prompt_seq, self.class_emb, self.guideline_emb], dim=1)
        mask = torch.cat([self.prompt_mask, self.class_mask, self.guideline_mask], dim=1)
        return kv, mask

    def present(self, name: str) -> torch.Tensor:
        return self.flags[name]


class ConditionEncoders(nn.Module):
    """Owns all condition streams, their null embeddings, and the frozen VAE."""

    def __init__(
        self,
        schema: AttributeSchema,
        vae: LayoutVae,
        vocab: Vocab,
        width: int,
        heads: int,
        mlp_width: int,
        max_prompt_tokens: int = 128,
    ):
        super().__init__()
        self.schema = schema
        self.width = width
        self.max_prompt_tokens = max_prompt_tokens
        self.vocab = vocab
        self.vae = vae
        for p in self.vae.parameters():
            p.requires_grad_(False)
        self.text = TinyTextEncoder(len(vocab), width, heads, mlp_width)
        self.class_enc = ClassCountEncoder(
            schema.num_classes, schema.element_capacity, width, heads, mlp_width
        )
        self.guide_enc = GuidelineEncoder(schema.resolution, width, heads, mlp_width)
        self.given_proj = nn.Linear(vae.config.latent_dim, width)
        self.nulls = nn.ParameterDict(
            {
                "prompt_seq": nn.Parameter(torch.randn(width) * 0.02),
                "prompt_pool": nn.Parameter(torch.randn(width) * 0.02),
                "class_count": nn.Parameter(torch.randn(width) * 0.02),
                "given_design": nn.Parameter(torch.randn(width) * 0.02),
                "guidelines": nn.Parameter(torch.randn(width) * 0.02),
            }
        )

    @property
    def dtype(self) -> torch.dtype:
        return self.given_proj.weight.dtype

    def _null_stream(self, name: str, batch: int, length: int = 1) -> tuple[torch.Tensor, torch.Tensor]:
        """A single unmasked null token followed by padding."""
        seq = torch.zeros(batch, length, self.width, dtype=self.dtype)
        seq[:, 0] = self.nulls[name].to(self.dtype)
        mask = torch.ones(batch, length, dtype=torch.bool)
        mask[:, 0] = False
        return seq, mask

    def encode_prompt(self, prompt: Prompt) -> tuple[torch.Tensor, torch.Tensor]:
        """Sequential and pooled embeddings of one prompt."""
        enc = self.assemble([ConditionSet(prompt=prompt)])
        return enc.prompt_seq[0], enc.prompt_pool[0]

    def _prompt_ids(self, prompt: Prompt) -> list[int]:
        ids = self.vocab.encode(prompt.tokens())[: self.max_prompt_tokens]
        return ids or [0]

    def assemble(self, batch: Sequence[ConditionSet]) -> EncodedConditions:
        if not batch:
            raise EncoderError("assemble requires at least one condition set")
        b = len(batch)
        n = self.schema.element_capacity
        dtype = self.dtype

        flags = {
            name: torch.tensor([cs.present(name) for cs in batch])
            for name in CONDITION_NAMES
        }

        # prompt stream
        p_idx = [i for i in range(b) if batch[i].present("prompt")]
        ids_list = [self._prompt_ids(batch[i].prompt) for i in p_idx]
        lp = max(1, max((len(ids) for ids in ids_list), default=1))
        prompt_seq, prompt_mask = self._null_stream("prompt_seq", b, lp)
        prompt_pool = self.nulls["prompt_pool"].to(dtype).expand(b, self.width).clone()
        if p_idx:
            ids = torch.zeros(len(p_idx), lp, dtype=torch.long)
            mask = torch.ones(len(p_idx), lp, dtype=torch.bool)
            for j, row in enumerate(ids_list):
                ids[j, : len(row)] = torch.tensor(row)
                mask[j, : len(row)] = False
            seq, pool = self.text(ids, mask)
            for j, i in enumerate(p_idx):
                prompt_seq[i] = torch.where(mask[j][:, None], prompt_seq[i], seq[j].to(dtype))
                prompt_mask[i] = mask[j]
                prompt_pool[i] = pool[j].to(dtype)

        # class-count stream
        c_idx = [i for i in range(b) if batch[i].present("class_count")]
        lc = max(1, self.schema.num_classes if c_idx else 1)
        class_emb, class_mask = self._null_stream("class_count", b, lc)
        if c_idx:
            counts = torch.tensor([batch[i].class_count for i in c_idx], dtype=torch.long)
            out = self.class_enc(counts).to(dtype)
            for j, i in enumerate(c_idx):
                class_emb[i] = out[j]
                class_mask[i] = False

        # given-design stream rides the element axis: always N tokens
        g_idx = [i for i in range(b) if batch[i].present("given_design")]
        given_emb = (
            self.nulls["given_design"].to(dtype).view(1, 1, -1).expand(b, n, self.width).clone()
        )
        if g_idx:
            x = layouts_to_tensor([batch[i].given_design for i in g_idx]).to(dtype)
            with torch.no_grad():
                mean, _ = self.vae.encode(x)
            proj = self.given_proj(mean.detach())
            for j, i in enumerate(g_idx):
                given_emb[i] = proj[j]

        # guideline stream
        u_idx = [i for i in range(b) if batch[i].present("guidelines")]
        lines = [sorted(set(batch[i].guidelines)) for i in u_idx]
        lu = max(1, max((len(g) for g in lines), default=1))
        guideline_emb, guideline_mask = self._null_stream("guidelines", b, lu)
        if u_idx:
            feats = torch.zeros(len(u_idx), lu, 2 + self.schema.resolution, dtype=dtype)
            mask = torch.ones(len(u_idx), lu, dtype=torch.bool)
            for j, gs in enumerate(lines):
                feats[j, : len(gs)] = self.guide_enc.featurize(gs, dtype)
                mask[j, : len(gs)] = False
            out = self.guide_enc(feats, mask).to(dtype)
            for j, i in enumerate(u_idx):
                guideline_emb[i] = torch.where(mask[j][:, None], guideline_emb[i], out[j])
                guideline_mask[i] = mask[j]

        return EncodedConditions(
            prompt_seq=prompt_seq,
            prompt_mask=prompt_mask,
            prompt_pool=prompt_pool,
            class_emb=class_emb,
            class_mask=class_mask,
            given_emb=given_emb,
            guideline_emb=guideline_emb,
            guideline_mask=guideline_mask,
            flags=flags,
        )

    def null_out(self, enc: EncodedConditions, names: Sequence[str]) -> EncodedConditions:
        """Replace the named streams with their learned null embeddings."""
        for name in names:
            if name not in CONDITION_NAMES:
                raise EncoderError(f"unknown condition {name!r}")
        b = enc.batch_size
        out = replace(enc, flags=dict(enc.flags))
        if "prompt" in names:
            out.prompt_seq, out.prompt_mask = self._null_stream("prompt_seq", b)
            out.prompt_pool = self.nulls["prompt_pool"].to(self.dtype).expand(b, self.width).clone()
            out.flags["prompt"] = torch.zeros(b, dtype=torch.bool)
        if "class_count" in names:
            out.class_emb, out.class_mask = self._null_stream("class_count", b)
            out.flags["class_count"] = torch.zeros(b, dtype=torch.bool)
        if "given_design" in names:
            n = self.schema.element_capacity
            out.given_emb = (
                self.nulls["given_design"].to(self.dtype).view(1, 1, -1).expand(b, n, self.width).clone()
            )
            out.flags["given_design"] = torch.zeros(b, dtype=torch.bool)
        if "guidelines" in names:
            out.guideline_emb, out.guideline_mask = self._null_stream("guidelines", b)
            out.flags["guidelines"] = torch.zeros(b, dtype=torch.bool)
        return out
