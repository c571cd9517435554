"""Template-based prompt synthesis.

Stands in for an LLM screen-summary pipeline: prompts are generated
deterministically from layout structure (class counts, vertical regions,
alignment columns), in one of four description styles. The seed only selects
between synonymous phrasings, so identical layouts always produce structurally
identical prompts.
"""
from __future__ import annotations

import numpy as np

from layoutdiff.conditions import Prompt
from layoutdiff.layouts import Layout, count_classes
from layoutdiff.rng import rng_from

PROMPT_STYLES = ("layout", "functionality", "usability", "overview")

_REGIONS = ("top", "middle", "bottom")


def _plural(name: str, n: int) -> str:
    return name if n == 1 else name + ("es" if name.endswith(("s", "x")) else "s")


def _count_phrase(schema, counts) -> str:
    parts = [
        f"{int(c)} {_plural(schema.class_name(k), int(c))}"
        for k, c in enumerate(counts)
        if c > 0
    ]
    if not parts:
        return "no elements"
    if len(parts) == 1:
        return parts[0]
    return ", ".join(parts[:-1]) + " and " + parts[-1]


def _dominant_region(layout: Layout) -> str:
    res = layout.schema.resolution
    mass = [0, 0, 0]
    for e in layout.valid_elements:
        _, y0, _, y1 = e.box(layout.schema)
        center = (y0 + y1) / 2.0
        mass[min(2, int(3 * center / res))] += 1
    return _REGIONS[int(np.argmax(mass))]


def _column_count(layout: Layout) -> int:
    return len({e.box(layout.schema)[0] for e in layout.valid_elements})


def _largest(layout: Layout):
    best, best_area = None, -1
    for e in layout.valid_elements:
        x0, y0, x1, y1 = e.box(layout.schema)
        area = (x1 - x0 + 1) * (y1 - y0 + 1)
        if area > best_area:
            best, best_area = e, area
    return best


def synthesize_prompt(layout: Layout, style: str = "layout", seed: int = 0) -> Prompt:
    """Generate a deterministic multi-sentence description of a layout."""
    if style not in PROMPT_STYLES:
        raise ValueError(f"unknown prompt style {style!r}; options: {PROMPT_STYLES}")
    if layout.num_valid == 0:
        return Prompt(("The screen is empty.",))

    schema = layout.schema
    rng = rng_from(seed)
    counts = count_classes(layout)
    region = _dominant_region(layout)
    cols = _column_count(layout)
    big = _largest(layout)
    big_name = schema.class_name(big.class_id(schema))
    n = layout.num_valid

    def pick(*options: str) -> str:
        return options[int(rng.integers(len(options)))]

    sentences: list[str] = []
    if style == "layout":
        sentences.append(
            pick(
                f"The screen contains {_count_phrase(schema, counts)}.",
                f"This layout is made of {_count_phrase(schema, counts)}.",
            )
        )
        sentences.append(
            pick(
                f"Most elements sit in the {region} third of the screen.",
                f"The {region} region holds most of the content.",
            )
        )
        sentences.append(
            pick(
                f"Elements align to {cols} vertical guides.",
                f"The content is arranged across {cols} columns.",
            )
        )
        sentences.append(
            pick(
                f"A large {big_name} dominates the layout.",
                f"The biggest element is a {big_name}.",
            )
        )
    elif style == "functionality":
        sentences.append(
            pick(
                f"This screen provides {_count_phrase(schema, counts)}.",
                f"The page exposes {_count_phrase(schema, counts)}.",
            )
        )
        sentences.append(
            pick(
                f"Its main functionality lives in the {region} area.",
                f"The {region} area carries the primary function.",
            )
        )
        sentences.append(f"A prominent {big_name} anchors the experience.")
    elif style == "usability":
        sentences.append(
            pick(
                f"A user can interact with {_count_phrase(schema, counts)}.",
                f"Users are offered {_count_phrase(schema, counts)}.",
            )
        )
        sentences.append(
            pick(
                f"Interaction focuses on the {region} of the screen.",
                f"Most interaction happens near the {region}.",
            )
        )
        sentences.append(f"Content flows over {cols} columns.")
    else:  # overview
        sentences.append(
            pick(
                f"A screen with {n} elements overall.",
                f"Overall the screen shows {n} elements.",
            )
        )
        sentences.append(f"It includes {_count_phrase(schema, counts)}.")
        sentences.append(f"Visually the {region} third feels heaviest.")

    return Prompt(tuple(sentences))
