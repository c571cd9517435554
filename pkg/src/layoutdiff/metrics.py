"""Evaluation metrics for generated layouts.

Distribution quality is measured with a Fréchet distance over visual features
(fid), prompt agreement with cycle-consistency retrieval metrics (cyc_sim_p,
cyc_sim_l), and condition satisfaction with c_usage, design_distance and
g_usage. Visual and sentence encoders are pluggable; the defaults are a
fixed-seed random convolutional network and a tf-idf bag-of-words encoder,
both deterministic and dependency-free.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image
from scipy import linalg

from layoutdiff.conditions import Guideline, Prompt, extract_guidelines
from layoutdiff.layouts import Layout, count_classes, layout_from_json, layout_to_json
from layoutdiff.rendering import render
from layoutdiff.schema import AttributeSchema


class MetricError(ValueError):
    pass


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; zero vectors have similarity 0 by convention."""
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# ---------------------------------------------------------------------------
# Visual features


class FeatureExtractor:
    """Maps an RGB raster to a fixed-length feature vector, deterministically."""

    dim: int
    raster_size: int

    def extract(self, raster: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def extract_batch(self, rasters: list[np.ndarray]) -> np.ndarray:
        return np.stack([self.extract(r) for r in rasters])

    def fingerprint(self) -> str:
        raise NotImplementedError

    def layout_features(self, layout: Layout) -> np.ndarray:
        return self.extract(render(layout, self.raster_size, self.raster_size))


class RandomConvFeatures(FeatureExtractor):
    """Fixed-seed random convolutional features over 64x64 rasters.

    Untrained but frozen: random projections preserve relative distances well
    enough to rank layout distributions, and carry no external model weights.
    """

    def __init__(self, seed: int = 0, dim: int = 64, raster_size: int = 64):
        self.seed = seed
        self.dim = dim
        self.raster_size = raster_size
        gen = torch.Generator().manual_seed(seed)
        self.net = torch.nn.Sequential(
            torch.nn.Conv2d(3, 16, 3, stride=2, padding=1),
            torch.nn.GELU(),
            torch.nn.Conv2d(16, 32, 3, stride=2, padding=1),
            torch.nn.GELU(),
            torch.nn.Conv2d(32, dim, 3, stride=2, padding=1),
            torch.nn.GELU(),
            torch.nn.AdaptiveAvgPool2d(1),
        )
        with torch.no_grad():
            for p in self.net.parameters():
                p.copy_(torch.randn(p.shape, generator=gen) * 0.2)
        self.net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)

    def _to_tensor(self, raster: np.ndarray) -> torch.Tensor:
        if raster.shape[:2] != (self.raster_size, self.raster_size):
            img = Image.fromarray(raster).resize(
                (self.raster_size, self.raster_size), Image.BILINEAR
            )
            raster = np.asarray(img)
        x = torch.from_numpy(raster.astype(np.float32) / 127.5 - 1.0)
        return x.permute(2, 0, 1)

    def extract(self, raster: np.ndarray) -> np.ndarray:
        return self.extract_batch([raster])[0]

    def extract_batch(self, rasters: list[np.ndarray]) -> np.ndarray:
        if not rasters:
            return np.zeros((0, self.dim), dtype=np.float32)
        x = torch.stack([self._to_tensor(r) for r in rasters])
        with torch.no_grad():
            f = self.net(x).squeeze(-1).squeeze(-1)
        return f.numpy().astype(np.float32)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"randconv/seed={self.seed}/dim={self.dim}/raster={self.raster_size}".encode())
        for p in self.net.parameters():
            h.update(p.numpy().astype(np.float32).tobytes())
        return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Sentence encoding


class SentenceEncoder:
    dim: int

    def encode(self, prompt: Prompt) -> np.ndarray:
        raise NotImplementedError

    def fingerprint(self) -> str:
        raise NotImplementedError


class TfidfSentenceEncoder(SentenceEncoder):
    """tf-idf bag-of-words over a fitted corpus vocabulary, L2-normalized."""

    def __init__(self, vocab: tuple[str, ...], idf: np.ndarray):
        if len(vocab) != len(idf):
            raise MetricError("vocab and idf length mismatch")
        self.vocab = tuple(vocab)
        self.idf = np.asarray(idf, dtype=np.float64)
        self.index = {w: i for i, w in enumerate(self.vocab)}
        self.dim = len(self.vocab)

    @classmethod
    def fit(cls, prompts: list[Prompt]) -> "TfidfSentenceEncoder":
        if not prompts:
            raise MetricError("cannot fit sentence encoder on an empty prompt list")
        df: dict[str, int] = {}
        for p in prompts:
            for w in set(p.tokens()):
                df[w] = df.get(w, 0) + 1
        vocab = tuple(sorted(df))
        n = len(prompts)
        idf = np.array([np.log((1 + n) / (1 + df[w])) + 1.0 for w in vocab])
        return cls(vocab, idf)

    def encode(self, prompt: Prompt) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.float64)
        for w in prompt.tokens():
            i = self.index.get(w)
            if i is not None:
                v[i] += 1.0
        v *= self.idf
        n = np.linalg.norm(v)
        if n > 0:
            v /= n
        return v.astype(np.float32)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update("tfidf".encode())
        h.update("\x00".join(self.vocab).encode())
        h.update(self.idf.astype(np.float64).tobytes())
        return h.hexdigest()[:16]

    def to_state(self) -> dict:
        return {"vocab": list(self.vocab), "idf": [float(x) for x in self.idf]}

    @classmethod
    def from_state(cls, state: dict) -> "TfidfSentenceEncoder":
        return cls(tuple(state["vocab"]), np.asarray(state["idf"]))


# ---------------------------------------------------------------------------
# Fréchet distance


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """Fréchet distance between Gaussian fits of two feature sets.

    d^2 = |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). Degenerate
    covariance products are regularized with 1e-6 I and reported via a warning.
    """
    a = np.asarray(feats_a, dtype=np.float64)
    b = np.asarray(feats_b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise MetricError("frechet_distance needs at least 2 samples per set")
    if a.shape[1] != b.shape[1]:
        raise MetricError("feature dimensionality mismatch")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.atleast_2d(np.cov(a, rowvar=False))
    cov_b = np.atleast_2d(np.cov(b, rowvar=False))

    covmean, _ = linalg.sqrtm(cov_a @ cov_b, disp=False)
    if not np.isfinite(covmean).all():
        warnings.warn("degenerate covariance product; regularizing with 1e-6 I")
        eps = 1e-6 * np.eye(cov_a.shape[0])
        covmean, _ = linalg.sqrtm((cov_a + eps) @ (cov_b + eps), disp=False)
    if np.iscomplexobj(covmean):
        covmean = covmean.real

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(covmean))
    return max(value, 0.0)


def fid(real: list[np.ndarray], gen: list[np.ndarray], fx: FeatureExtractor) -> float:
    """Fréchet distance between feature Gaussians of two raster sets."""
    if not real or not gen:
        raise MetricError("fid requires non-empty raster sets")
    return frechet_distance(fx.extract_batch(real), fx.extract_batch(gen))


# ---------------------------------------------------------------------------
# Evaluation corpus

_HEADER_SENTINEL = b"\n"


def _write_array(path, array: np.ndarray, header: dict) -> None:
    header = dict(header, dtype=str(array.dtype), shape=list(array.shape))
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode() + _HEADER_SENTINEL)
        f.write(np.ascontiguousarray(array).tobytes())


def _read_array(path) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as f:
        header_line = f.readline()
        header = json.loads(header_line.decode())
        data = np.frombuffer(f.read(), dtype=np.dtype(header["dtype"]))
    return data.reshape(header["shape"]).copy(), header


@dataclass(frozen=True)
class EvalCorpus:
    """Retrieval pool of (layout, prompt) pairs with precomputed embeddings."""

    schema: AttributeSchema
    layouts: tuple[Layout, ...]
    prompts: tuple[Prompt, ...]
    features: np.ndarray
    sentvecs: np.ndarray
    extractor: FeatureExtractor
    encoder: SentenceEncoder

    def __post_init__(self):
        n = len(self.layouts)
        if len(self.prompts) != n or self.features.shape[0] != n or self.sentvecs.shape[0] != n:
            raise MetricError("corpus arrays must align with the layout list")

    def __len__(self) -> int:
        return len(self.layouts)

    @classmethod
    def build(
        cls,
        layouts: list[Layout],
        prompts: list[Prompt],
        extractor: FeatureExtractor,
        encoder: SentenceEncoder | None = None,
    ) -> "EvalCorpus":
        if not layouts:
            raise MetricError("cannot build an empty corpus")
        if len(layouts) != len(prompts):
            raise MetricError("layouts and prompts must pair up")
        if encoder is None:
            encoder = TfidfSentenceEncoder.fit(prompts)
        size = extractor.raster_size
        rasters = [render(l, size, size) for l in layouts]
        features = extractor.extract_batch(rasters)
        sentvecs = np.stack([encoder.encode(p) for p in prompts]).astype(np.float32)
        return cls(
            schema=layouts[0].schema,
            layouts=tuple(layouts),
            prompts=tuple(prompts),
            features=features,
            sentvecs=sentvecs,
            extractor=extractor,
            encoder=encoder,
        )

    def save(self, directory) -> None:
        import os

        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "layouts.jsonl"), "w") as f:
            for layout in self.layouts:
                f.write(json.dumps(layout_to_json(layout), sort_keys=True) + "\n")
        with open(os.path.join(directory, "prompts.jsonl"), "w") as f:
            for prompt in self.prompts:
                f.write(json.dumps({"sentences": list(prompt.sentences)}) + "\n")
        _write_array(
            os.path.join(directory, "features.bin"),
            self.features,
            {"kind": "features", "extractor": self.extractor.fingerprint()},
        )
        sent_header: dict = {"kind": "sentvecs", "encoder": self.encoder.fingerprint()}
        if isinstance(self.encoder, TfidfSentenceEncoder):
            sent_header["tfidf"] = self.encoder.to_state()
        _write_array(os.path.join(directory, "sentvecs.bin"), self.sentvecs, sent_header)

    @classmethod
    def load(cls, directory, schema: AttributeSchema, extractor: FeatureExtractor) -> "EvalCorpus":
        import os

        layouts = []
        with open(os.path.join(directory, "layouts.jsonl")) as f:
            for line in f:
                if line.strip():
                    layouts.append(layout_from_json(json.loads(line), schema))
        prompts = []
        with open(os.path.join(directory, "prompts.jsonl")) as f:
            for line in f:
                if line.strip():
                    prompts.append(Prompt(tuple(json.loads(line)["sentences"])))
        features, fheader = _read_array(os.path.join(directory, "features.bin"))
        if fheader.get("extractor") != extractor.fingerprint():
            raise MetricError(
                "features.bin was computed with a different extractor "
                f"({fheader.get('extractor')} != {extractor.fingerprint()})"
            )
        sentvecs, sheader = _read_array(os.path.join(directory, "sentvecs.bin"))
        if "tfidf" in sheader:
            encoder: SentenceEncoder = TfidfSentenceEncoder.from_state(sheader["tfidf"])
        else:
            raise MetricError("sentvecs.bin does not carry a reconstructable encoder")
        return cls(
            schema=schema,
            layouts=tuple(layouts),
            prompts=tuple(prompts),
            features=features,
            sentvecs=sentvecs,
            extractor=extractor,
            encoder=encoder,
        )

    def layout_features(self, layout: Layout) -> np.ndarray:
        return self.extractor.layout_features(layout)

    def top_k_by_feature(self, query: np.ndarray, k: int) -> np.ndarray:
        sims = np.array([cosine(query, f) for f in self.features])
        return np.argsort(-sims, kind="stable")[:k]

    def top_k_by_sentence(self, query: np.ndarray, k: int) -> np.ndarray:
        sims = np.array([cosine(query, v) for v in self.sentvecs])
        return np.argsort(-sims, kind="stable")[:k]


# ---------------------------------------------------------------------------
# Cycle-consistency metrics


def _check_k(corpus: EvalCorpus, k: int) -> None:
    if len(corpus) == 0:
        raise MetricError("empty corpus")
    if not 1 <= k <= len(corpus):
        raise MetricError(f"k={k} out of range for corpus of size {len(corpus)}")


def cyc_sim_p(prompt: Prompt, gen_layout: Layout, corpus: EvalCorpus, k: int = 100) -> float:
    """Prompt cycle-consistency.

    Retrieves the k corpus layouts most visually similar to the generated
    layout and returns the mean sentence similarity between the query prompt
    and their prompts. Ties in retrieval break by corpus index.
    """
    _check_k(corpus, k)
    idx = corpus.top_k_by_feature(corpus.layout_features(gen_layout), k)
    qv = corpus.encoder.encode(prompt)
    return float(np.mean([cosine(qv, corpus.sentvecs[i]) for i in idx]))


def cyc_sim_l(prompt: Prompt, gen_layout: Layout, corpus: EvalCorpus, k: int = 100) -> float:
    """Layout cycle-consistency.

    Retrieves the k corpus prompts most similar to the query prompt and
    returns the mean visual similarity between the generated layout and their
    paired layouts.
    """
    _check_k(corpus, k)
    idx = corpus.top_k_by_sentence(corpus.encoder.encode(prompt), k)
    gv = corpus.layout_features(gen_layout)
    return float(np.mean([cosine(gv, corpus.features[i]) for i in idx]))


# ---------------------------------------------------------------------------
# Condition-satisfaction metrics


def c_usage(c_in: np.ndarray, gen: Layout) -> float:
    """Fraction of requested class counts covered by the generated layout.

    Surplus elements of a class never help or hurt: the per-class deficit is
    max(0, requested - generated).
    """
    c_in = np.asarray(c_in, dtype=np.int64)
    if c_in.shape != (gen.schema.num_classes,):
        raise MetricError("class-count vector does not match the schema")
    total = int(c_in.sum())
    if total <= 0:
        raise MetricError("c_usage is undefined for an all-zero request")
    got = count_classes(gen)
    deficit = np.maximum(0, c_in - got).sum()
    return float(1.0 - deficit / total)


_MAX_ELEMENT_DISTANCE = 2.0  # max normalized coordinate term (1) + class penalty (1)


def element_distance(a, b, schema: AttributeSchema) -> float:
    """Distance between two elements: normalized coordinate L1 plus class penalty."""
    res = schema.resolution
    box_a, box_b = a.box(schema), b.box(schema)
    coord = sum(abs(box_a[i] - box_b[i]) for i in range(4)) / (4.0 * res)
    return coord + (0.0 if a.class_id(schema) == b.class_id(schema) else 1.0)


def design_distance(e_prime: Layout, gen: Layout) -> float:
    """One-way Chamfer distance from the given design to the generated layout."""
    given = e_prime.valid_elements
    if not given:
        raise MetricError("design_distance requires at least one given element")
    produced = gen.valid_elements
    if not produced:
        return _MAX_ELEMENT_DISTANCE
    schema = e_prime.schema
    total = 0.0
    for e in given:
        total += min(element_distance(e, g, schema) for g in produced)
    return total / len(given)


def g_usage(g_in, gen: Layout) -> float:
    """Fraction of input guidelines that appear among the generated layout's."""
    wanted = {(g.axis, g.position) for g in g_in}
    if not wanted:
        raise MetricError("g_usage requires at least one input guideline")
    produced = {(w.guideline.axis, w.guideline.position) for w in extract_guidelines(gen)}
    return len(wanted & produced) / len(wanted)


def guidelines_from_positions(pairs) -> tuple[Guideline, ...]:
    return tuple(Guideline(axis, pos) for axis, pos in pairs)
