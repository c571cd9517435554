"""Shared builders for randomized test instances."""
from __future__ import annotations

import numpy as np

from layoutdiff.layouts import Element, Layout
from layoutdiff.schema import AttributeSchema


def random_element(schema: AttributeSchema, rng: np.random.Generator) -> Element:
    values = []
    xi0, yi0, xi1, yi1 = schema.coord_indices
    raw = [int(rng.integers(a.cardinality)) for a in schema.attributes]
    for lo, hi in ((xi0, xi1), (yi0, yi1)):
        if raw[lo] > raw[hi]:
            raw[lo], raw[hi] = raw[hi], raw[lo]
    return Element(tuple(raw), valid=True)


def random_layout(
    schema: AttributeSchema,
    rng: np.random.Generator,
    num_elements: int | None = None,
    max_elements: int | None = None,
) -> Layout:
    cap = schema.element_capacity if max_elements is None else max_elements
    k = int(rng.integers(cap + 1)) if num_elements is None else num_elements
    return Layout.from_valid_elements(
        schema, [random_element(schema, rng) for _ in range(k)]
    )
