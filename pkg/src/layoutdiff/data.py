"""Synthetic corpus generation, JSONL ingestion, splits, and dataset statistics.

The synthetic generator builds each layout from a recursive guillotine split
along a sampled guideline grid: a root container covers a jittered content
rectangle, the grid partitions it into cells that share boundary coordinates,
and some cells split again into nested strips. Every grid line is therefore an
element edge, which makes guideline conditioning learnable at toy scale, and
containers always precede their children.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from layoutdiff.conditions import Guideline, Prompt
from layoutdiff.layouts import Element, Layout, count_classes
from layoutdiff.prompts import PROMPT_STYLES, synthesize_prompt
from layoutdiff.rng import derive_seed, rng_from
from layoutdiff.schema import COORD_NAMES, AttributeSchema


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    """Configuration of the synthetic layout generator."""

    schema: AttributeSchema
    size: int
    seed: int = 0
    rows: tuple[int, int] = (1, 3)
    cols: tuple[int, int] = (1, 4)
    depth: tuple[int, int] = (0, 1)
    split_prob: float = 0.35
    class_weights: tuple[float, ...] | None = None
    margin_fraction: float = 0.125
    prompt_styles: tuple[str, ...] = PROMPT_STYLES

    def __post_init__(self):
        if self.size < 0:
            raise DataError("corpus size must be non-negative")
        for name, (lo, hi) in (("rows", self.rows), ("cols", self.cols), ("depth", self.depth)):
            if lo < 0 or hi < lo:
                raise DataError(f"invalid {name} range {(lo, hi)}")
        if self.rows[0] < 1 or self.cols[0] < 1:
            raise DataError("grid must have at least one row and one column")
        if not 0.0 <= self.split_prob <= 1.0:
            raise DataError("split_prob must lie in [0, 1]")
        if self.class_weights is not None:
            if len(self.class_weights) != self.schema.num_classes:
                raise DataError("class_weights length must equal the number of classes")
            if min(self.class_weights) < 0 or sum(self.class_weights) <= 0:
                raise DataError("class_weights must be non-negative with positive sum")
        for style in self.prompt_styles:
            if style not in PROMPT_STYLES:
                raise DataError(f"unknown prompt style {style!r}")

    def leaf_weights(self) -> np.ndarray:
        if self.class_weights is not None:
            w = np.asarray(self.class_weights, dtype=np.float64)
        else:
            # default mix: containers appear structurally, leaves favor content
            w = np.ones(self.schema.num_classes, dtype=np.float64)
            w[_container_class(self.schema)] = 0.25
        return w / w.sum()


@dataclass(frozen=True)
class SynthItem:
    layout: Layout
    prompt: Prompt
    grid: tuple[Guideline, ...]


@dataclass(frozen=True)
class DatasetStats:
    element_count_hist: dict[int, int]
    class_frequencies: tuple[int, ...]


def _container_class(schema: AttributeSchema) -> int:
    if schema.class_names and "container" in schema.class_names:
        return schema.class_names.index("container")
    return 0


def _boundaries(rng: np.random.Generator, lo: int, hi: int, n: int) -> list[int]:
    """n segments over [lo, hi] as n+1 strictly increasing boundaries, gaps >= 2."""
    w = hi - lo
    n = max(1, min(n, w // 2))
    bounds = [lo]
    for i in range(1, n):
        base = lo + (i * w) // n
        jitter_span = w // (4 * n)
        jitter = int(rng.integers(-jitter_span, jitter_span + 1)) if jitter_span > 0 else 0
        b = min(base + jitter, hi - 2 * (n - i))
        bounds.append(max(bounds[-1] + 2, b))
    bounds.append(hi)
    return bounds


def _style_values(rng: np.random.Generator, schema: AttributeSchema) -> list[int]:
    values = []
    for i, attr in enumerate(schema.attributes):
        if i == schema.class_attribute_index or i in schema.coord_indices:
            continue
        values.append(int(rng.integers(attr.cardinality)))
    return values


def _make_element(
    schema: AttributeSchema,
    rng: np.random.Generator,
    class_id: int,
    box: tuple[int, int, int, int],
) -> Element:
    x0, y0, x1, y1 = box
    values = [class_id, x0, y0, x1, y1] + _style_values(rng, schema)
    return Element(tuple(values), True)


def generate_one(spec: SynthSpec, seed: int, style_index: int = 0) -> SynthItem:
    """Build a single grid-aligned layout with its prompt and generating grid."""
    schema = spec.schema
    rng = rng_from(seed)
    res = schema.resolution
    margin = max(1, int(res * spec.margin_fraction))
    x0 = int(rng.integers(0, margin + 1))
    y0 = int(rng.integers(0, margin + 1))
    x1 = res - 1 - int(rng.integers(0, margin + 1))
    y1 = res - 1 - int(rng.integers(0, margin + 1))

    ncols = int(rng.integers(spec.cols[0], spec.cols[1] + 1))
    nrows = int(rng.integers(spec.rows[0], spec.rows[1] + 1))
    xs = _boundaries(rng, x0, x1, ncols)
    ys = _boundaries(rng, y0, y1, nrows)
    grid = tuple(
        [Guideline("x", p) for p in xs] + [Guideline("y", p) for p in ys]
    )

    container = _container_class(schema)
    weights = spec.leaf_weights()
    max_depth = int(rng.integers(spec.depth[0], spec.depth[1] + 1))
    budget = schema.element_capacity - 1 - (len(xs) - 1) * (len(ys) - 1)

    elements = [_make_element(schema, rng, container, (x0, y0, x1, y1))]

    def emit_region(box: tuple[int, int, int, int], level: int) -> None:
        nonlocal budget
        bx0, by0, bx1, by1 = box
        w, h = bx1 - bx0, by1 - by0
        can_split = (
            level < max_depth
            and max(w, h) >= 4
            and budget >= 2
            and rng.random() < spec.split_prob
        )
        if not can_split:
            class_id = int(rng.choice(schema.num_classes, p=weights))
            elements.append(_make_element(schema, rng, class_id, box))
            return
        elements.append(_make_element(schema, rng, container, box))
        axis = "x" if w >= h else "y"
        span = w if axis == "x" else h
        parts = 3 if span >= 6 and budget >= 3 and rng.random() < 0.5 else 2
        budget -= parts
        lo, hi = (bx0, bx1) if axis == "x" else (by0, by1)
        cuts = _boundaries(rng, lo, hi, parts)
        for a, b in zip(cuts[:-1], cuts[1:]):
            child = (a, by0, b, by1) if axis == "x" else (bx0, a, bx1, b)
            emit_region(child, level + 1)

    for r in range(len(ys) - 1):
        for c in range(len(xs) - 1):
            emit_region((xs[c], ys[r], xs[c + 1], ys[r + 1]), 1)

    layout = Layout.from_valid_elements(schema, elements)
    style = spec.prompt_styles[style_index % len(spec.prompt_styles)]
    prompt = synthesize_prompt(layout, style, seed=derive_seed(seed, 1))
    return SynthItem(layout, prompt, grid)


def generate_corpus(spec: SynthSpec) -> list[SynthItem]:
    """Deterministic corpus of grid-aligned layouts paired with prompts."""
    return [generate_one(spec, derive_seed(spec.seed, i), i) for i in range(spec.size)]


# ---------------------------------------------------------------------------
# Ingestion


@dataclass(frozen=True)
class IngestResult:
    layouts: list[Layout]
    dropped_over_capacity: int
    malformed: int


def _scale_coord(value: int, source_resolution: int, target_resolution: int) -> int:
    scaled = (value * target_resolution) // source_resolution
    return min(max(scaled, 0), target_resolution - 1)


def ingest(path, schema: AttributeSchema, source_resolution: int | None = None) -> IngestResult:
    """Read layout JSONL, quantize coordinates, and enforce capacity.

    Layouts with more valid elements than the schema capacity are dropped;
    records that fail to parse or validate are skipped and counted.
    """
    src_res = source_resolution or schema.resolution
    layouts: list[Layout] = []
    dropped = 0
    malformed = 0
    coord_names = set(COORD_NAMES)
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                raw_elements = record["elements"]
                parsed = []
                for entry in raw_elements:
                    if not entry.get("valid", True):
                        continue
                    values = []
                    for attr in schema.attributes:
                        v = int(entry[attr.name])
                        if attr.name in coord_names:
                            v = _scale_coord(v, src_res, schema.resolution)
                        elif not 0 <= v < attr.cardinality:
                            raise DataError(f"{attr.name} out of range")
                        values.append(v)
                    x0, y0, x1, y1 = (values[i] for i in schema.coord_indices)
                    if x1 < x0 or y1 < y0:
                        raise DataError("inverted box")
                    parsed.append(Element(tuple(values), True))
            except (KeyError, TypeError, ValueError) as exc:
                malformed += 1
                warnings.warn(f"skipping malformed layout record: {exc}")
                continue
            if len(parsed) > schema.element_capacity:
                dropped += 1
                continue
            layouts.append(Layout.from_valid_elements(schema, parsed))
    return IngestResult(layouts, dropped, malformed)


# ---------------------------------------------------------------------------
# Statistics and splits


def stats(layouts: list[Layout]) -> DatasetStats:
    hist: dict[int, int] = {}
    if layouts:
        freqs = np.zeros(layouts[0].schema.num_classes, dtype=np.int64)
    else:
        freqs = np.zeros(0, dtype=np.int64)
    for layout in layouts:
        n = layout.num_valid
        hist[n] = hist.get(n, 0) + 1
        freqs += count_classes(layout)
    return DatasetStats(hist, tuple(int(c) for c in freqs))


def split_corpus(items: list, eval_fraction: float, seed: int = 0) -> tuple[list, list]:
    """Disjoint train/eval split, deterministic under seed."""
    if not 0.0 <= eval_fraction <= 1.0:
        raise DataError("eval_fraction must lie in [0, 1]")
    order = rng_from(seed).permutation(len(items))
    n_eval = int(round(len(items) * eval_fraction))
    eval_idx = set(order[:n_eval].tolist())
    train = [items[i] for i in range(len(items)) if i not in eval_idx]
    held = [items[i] for i in range(len(items)) if i in eval_idx]
    return train, held


# ---------------------------------------------------------------------------
# Corpus directory IO (shared with the evaluation corpus format)


def save_pairs(directory, items: list[SynthItem] | list[tuple[Layout, Prompt]]) -> None:
    import os

    from layoutdiff.layouts import layout_to_json

    os.makedirs(directory, exist_ok=True)
    pairs = [(it.layout, it.prompt) if isinstance(it, SynthItem) else it for it in items]
    with open(os.path.join(directory, "layouts.jsonl"), "w") as f:
        for layout, _ in pairs:
            f.write(json.dumps(layout_to_json(layout), sort_keys=True) + "\n")
    with open(os.path.join(directory, "prompts.jsonl"), "w") as f:
        for _, prompt in pairs:
            f.write(json.dumps({"sentences": list(prompt.sentences)}) + "\n")


def load_pairs(directory, schema: AttributeSchema) -> list[tuple[Layout, Prompt]]:
    import os

    from layoutdiff.layouts import layout_from_json

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
    if len(layouts) != len(prompts):
        raise DataError("corpus directory has mismatched layouts and prompts")
    return list(zip(layouts, prompts))


# ---------------------------------------------------------------------------
# Development sampler (model-free stand-in used by the service dev mode)


def dev_sample(schema: AttributeSchema, conditions, seed: int) -> Layout:
    """Deterministic model-free sampler honoring pins, counts, and guidelines.

    Used by the HTTP service's development mode so clients can exercise the
    full request/response loop without trained checkpoints.
    """
    rng = rng_from(seed)
    elements: list[Element] = []
    if conditions.given_design is not None:
        elements.extend(conditions.given_design.valid_elements)

    res = schema.resolution
    xs = sorted({g.position for g in (conditions.guidelines or ()) if g.axis == "x"})
    ys = sorted({g.position for g in (conditions.guidelines or ()) if g.axis == "y"})

    def sample_span(lines: list[int]) -> tuple[int, int]:
        if len(lines) >= 2:
            i = int(rng.integers(len(lines) - 1))
            j = int(rng.integers(i + 1, len(lines)))
            return lines[i], lines[j]
        lo = int(rng.integers(res - 1))
        hi = int(rng.integers(lo + 1, res))
        return lo, hi

    have = np.zeros(schema.num_classes, dtype=np.int64)
    for e in elements:
        have[e.class_id(schema)] += 1
    if conditions.class_count is not None:
        targets = [
            (k, int(max(0, conditions.class_count[k] - have[k])))
            for k in range(schema.num_classes)
        ]
    else:
        total = int(rng.integers(2, min(6, schema.element_capacity) + 1))
        extra = max(0, total - len(elements))
        targets = [(int(rng.integers(schema.num_classes)), 1) for _ in range(extra)]

    for class_id, need in targets:
        for _ in range(need):
            if len(elements) >= schema.element_capacity:
                break
            x0, x1 = sample_span(xs)
            y0, y1 = sample_span(ys)
            values = [class_id, x0, y0, x1, y1] + _style_values(rng, schema)
            elements.append(Element(tuple(values), True))
    if not elements:
        x0, x1 = sample_span(xs)
        y0, y1 = sample_span(ys)
        values = [0, x0, y0, x1, y1] + _style_values(rng, schema)
        elements.append(Element(tuple(values), True))
    return Layout.from_valid_elements(schema, elements[: schema.element_capacity])
