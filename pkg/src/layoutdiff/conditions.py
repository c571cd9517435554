"""Condition types and the operations that derive them from layouts.

The four generation conditions are: a multi-sentence text prompt, a per-class
count vector, a partially completed given design, and a set of alignment
guidelines. Training pairs are built by extracting conditions from corpus
layouts, sampling random subsets of each, and applying hierarchical dropout
(all conditions together, then each independently).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from layoutdiff.layouts import Layout, count_classes
from layoutdiff.rng import rng_from

AXES = ("x", "y")

#: Fixed condition order, used for deterministic tie-breaking everywhere.
CONDITION_NAMES = ("prompt", "class_count", "given_design", "guidelines")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ConditionError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Guideline:
    """An axis-aligned alignment line at a quantized coordinate."""

    axis: str
    position: int

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConditionError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.position < 0:
            raise ConditionError(f"negative guideline position {self.position}")


@dataclass(frozen=True)
class WeightedGuideline:
    """A guideline plus the total box-edge length lying exactly on it."""

    guideline: Guideline
    weight: int


@dataclass(frozen=True)
class Prompt:
    """An ordered list of sentences describing a layout."""

    sentences: tuple[str, ...]

    def __post_init__(self):
        if not self.sentences:
            raise ConditionError("a prompt must contain at least one sentence")

    def tokens(self) -> list[str]:
        """Lowercased word tokens across all sentences."""
        out: list[str] = []
        for s in self.sentences:
            out.extend(_TOKEN_RE.findall(s.lower()))
        return out

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class ConditionSet:
    """Any subset of the four conditions; all may be absent (unconditional)."""

    prompt: Prompt | None = None
    class_count: tuple[int, ...] | None = None
    given_design: Layout | None = None
    guidelines: tuple[Guideline, ...] | None = None

    def __post_init__(self):
        if self.class_count is not None and any(c < 0 for c in self.class_count):
            raise ConditionError("class counts must be nonnegative")
        if self.guidelines is not None:
            if len(set(self.guidelines)) != len(self.guidelines):
                raise ConditionError("duplicate guidelines in condition set")

    def present(self, name: str) -> bool:
        value = getattr(self, name)
        if name == "guidelines":
            return value is not None and len(value) > 0
        return value is not None

    @property
    def present_names(self) -> tuple[str, ...]:
        return tuple(n for n in CONDITION_NAMES if self.present(n))

    def without(self, names) -> "ConditionSet":
        drop = set(names)
        return ConditionSet(
            prompt=None if "prompt" in drop else self.prompt,
            class_count=None if "class_count" in drop else self.class_count,
            given_design=None if "given_design" in drop else self.given_design,
            guidelines=None if "guidelines" in drop else self.guidelines,
        )


@dataclass(frozen=True)
class DropoutPolicy:
    """Hierarchical condition dropout: all together, then each independently."""

    p_cfg: float = 0.1
    p_cond: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("p_cfg", "p_cond"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ConditionError(f"{name} must lie in [0, 1], got {p}")


# -- guideline extraction and sampling ---------------------------------------


def extract_guidelines(layout: Layout) -> tuple[WeightedGuideline, ...]:
    """Project box coordinates onto the axes and deduplicate.

    Every valid element contributes X guidelines at x_min and x_max and Y
    guidelines at y_min and y_max. A guideline's weight is the summed length
    (in covered cells, so always >= 1 per edge) of the box edges lying exactly
    on it. Output is sorted X-axis first, then by position.
    """
    weights: dict[Guideline, int] = {}
    schema = layout.schema
    for e in layout.valid_elements:
        x0, y0, x1, y1 = e.box(schema)
        h_len = y1 - y0 + 1
        v_len = x1 - x0 + 1
        for g, w in (
            (Guideline("x", x0), h_len),
            (Guideline("x", x1), h_len),
            (Guideline("y", y0), v_len),
            (Guideline("y", y1), v_len),
        ):
            weights[g] = weights.get(g, 0) + w
    return tuple(
        WeightedGuideline(g, weights[g]) for g in sorted(weights)
    )


def sample_guidelines(
    gs, p_base: float, seed: int
) -> tuple[Guideline, ...]:
    """Keep each guideline independently with probability p_base ** (mean_w / w).

    Heavier guidelines (more overlapping edge length) are kept more often.
    Deterministic under the seed; an empty input yields an empty output.
    """
    if not (0.0 < p_base <= 1.0):
        raise ConditionError(f"p_base must lie in (0, 1], got {p_base}")
    gs = tuple(gs)
    if not gs:
        return ()
    weights = np.array([wg.weight for wg in gs], dtype=np.float64)
    if np.any(weights <= 0):
        raise ConditionError("guideline weights must be positive")
    mean_w = weights.mean()
    keep_p = p_base ** (mean_w / weights)
    rng = rng_from(seed)
    mask = rng.random(len(gs)) < keep_p
    return tuple(wg.guideline for wg, m in zip(gs, mask) if m)


def guideline_positions(layout: Layout) -> tuple[Guideline, ...]:
    """Unweighted guideline set of a layout (used by the usage metric)."""
    return tuple(wg.guideline for wg in extract_guidelines(layout))


# -- per-condition subset sampling -------------------------------------------


def subset_given_design(layout: Layout, keep_fraction: float, seed: int) -> Layout:
    """Keep a uniform subset of valid elements in their original order."""
    if not (0.0 <= keep_fraction <= 1.0):
        raise ConditionError(f"keep_fraction must lie in [0, 1], got {keep_fraction}")
    valid = layout.valid_elements
    k = int(np.floor(keep_fraction * len(valid) + 0.5))
    if k >= len(valid):
        return layout
    rng = rng_from(seed)
    keep = sorted(rng.choice(len(valid), size=k, replace=False))
    return Layout.from_valid_elements(layout.schema, [valid[i] for i in keep])


def subset_class_count(
    counts, seed: int, keep_prob: float = 0.5
) -> tuple[int, ...]:
    """Zero out a random subset of the nonzero classes."""
    counts = tuple(int(c) for c in counts)
    if any(c < 0 for c in counts):
        raise ConditionError("class counts must be nonnegative")
    rng = rng_from(seed)
    out = []
    for c in counts:
        keep = c > 0 and rng.random() < keep_prob
        out.append(c if keep else 0)
    return tuple(out)


def subset_prompt(prompt: Prompt, seed: int, keep_prob: float = 0.5) -> Prompt:
    """Keep a nonempty random subset of sentences in their original order."""
    rng = rng_from(seed)
    mask = rng.random(len(prompt.sentences)) < keep_prob
    if not mask.any():
        mask[int(rng.integers(len(prompt.sentences)))] = True
    return Prompt(tuple(s for s, m in zip(prompt.sentences, mask) if m))


def apply_dropout(
    cs: ConditionSet, policy: DropoutPolicy, rng: np.random.Generator | None = None
) -> ConditionSet:
    """Hierarchical dropout over a condition set.

    With probability p_cfg all members are dropped together; otherwise each
    present member is dropped independently with probability p_cond. A member
    is always wholly present or wholly absent.
    """
    rng = rng_from(policy.seed) if rng is None else rng
    if rng.random() < policy.p_cfg:
        return ConditionSet()
    drop = [n for n in CONDITION_NAMES if rng.random() < policy.p_cond]
    return cs.without(drop)


# -- JSON interchange ---------------------------------------------------------


def condition_set_to_json(cs: ConditionSet) -> dict:
    from layoutdiff.layouts import layout_to_json

    return {
        "prompt": list(cs.prompt.sentences) if cs.prompt is not None else None,
        "class_count": list(cs.class_count) if cs.class_count is not None else None,
        "given_design": (
            layout_to_json(cs.given_design) if cs.given_design is not None else None
        ),
        "guidelines": (
            [{"axis": g.axis, "pos": g.position} for g in cs.guidelines]
            if cs.guidelines is not None
            else None
        ),
    }


def condition_set_from_json(obj: dict, schema) -> ConditionSet:
    from layoutdiff.layouts import layout_from_json

    if not isinstance(obj, dict):
        raise ConditionError("condition set JSON must be an object")
    prompt = obj.get("prompt")
    counts = obj.get("class_count")
    given = obj.get("given_design")
    guides = obj.get("guidelines")
    if counts is not None and len(counts) != schema.num_classes:
        raise ConditionError(
            f"class_count length {len(counts)} != num_classes {schema.num_classes}"
        )
    gl = None
    if guides is not None:
        gl = tuple(Guideline(g["axis"], int(g["pos"])) for g in guides)
        for g in gl:
            if g.position >= schema.resolution:
                raise ConditionError(
                    f"guideline position {g.position} outside resolution "
                    f"{schema.resolution}"
                )
    return ConditionSet(
        prompt=Prompt(tuple(prompt)) if prompt is not None else None,
        class_count=tuple(int(c) for c in counts) if counts is not None else None,
        given_design=layout_from_json(given, schema) if given is not None else None,
        guidelines=gl,
    )


def conditions_from_layout(layout: Layout, prompt: Prompt | None = None) -> ConditionSet:
    """Derive the full condition set of a layout (editor round-trips)."""
    from layoutdiff.prompts import synthesize_prompt

    return ConditionSet(
        prompt=prompt if prompt is not None else synthesize_prompt(layout),
        class_count=tuple(int(c) for c in count_classes(layout)),
        given_design=layout,
        guidelines=guideline_positions(layout),
    )
