"""Layout data model and discrete <-> one-hot conversions.

A layout is a fixed-length sequence of elements. Slots beyond the valid
elements are filled with the reserved invalid element, whose every attribute
takes the sentinel value (one extra one-hot slot per attribute). Operations
here are pure functions over immutable values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from layoutdiff.schema import COORD_NAMES, AttributeSchema, SchemaError


class LayoutError(ValueError):
    """Raised for layouts or matrices that violate their schema."""


@dataclass(frozen=True)
class Element:
    """One layout element: a tuple of attribute values plus a validity flag.

    For a valid element, values[i] lies in [0, d_i). For the invalid padding
    element every values[i] equals the sentinel d_i.
    """

    values: tuple[int, ...]
    valid: bool = True

    @classmethod
    def invalid_for(cls, schema: AttributeSchema) -> "Element":
        return cls(tuple(a.cardinality for a in schema.attributes), valid=False)

    def validate(self, schema: AttributeSchema) -> None:
        if len(self.values) != schema.num_attributes:
            raise LayoutError(
                f"element has {len(self.values)} values, schema declares "
                f"{schema.num_attributes} attributes"
            )
        for i, (v, a) in enumerate(zip(self.values, schema.attributes)):
            if self.valid:
                if not (0 <= v < a.cardinality):
                    raise LayoutError(
                        f"attribute {i} ({a.name}): value {v} outside [0, {a.cardinality})"
                    )
            elif v != a.cardinality:
                raise LayoutError(
                    f"attribute {i} ({a.name}): invalid element must hold sentinel "
                    f"{a.cardinality}, got {v}"
                )
        if self.valid:
            xi0, yi0, xi1, yi1 = (
                schema.attribute_index(c) for c in COORD_NAMES
            )
            if self.values[xi0] > self.values[xi1]:
                raise LayoutError("x_min > x_max")
            if self.values[yi0] > self.values[yi1]:
                raise LayoutError("y_min > y_max")

    def value(self, schema: AttributeSchema, name: str) -> int:
        return self.values[schema.attribute_index(name)]

    def box(self, schema: AttributeSchema) -> tuple[int, int, int, int]:
        """(x_min, y_min, x_max, y_max) in quantized coordinates."""
        xi0, yi0, xi1, yi1 = schema.coord_indices
        v = self.values
        return v[xi0], v[yi0], v[xi1], v[yi1]

    def class_id(self, schema: AttributeSchema) -> int:
        return self.values[schema.class_attribute_index]


@dataclass(frozen=True)
class Layout:
    """Fixed-length element sequence; invalid padding is a contiguous suffix."""

    schema: AttributeSchema
    elements: tuple[Element, ...]

    def __post_init__(self):
        n = self.schema.element_capacity
        if len(self.elements) != n:
            raise LayoutError(
                f"layout has {len(self.elements)} slots, schema capacity is {n}"
            )
        seen_invalid = False
        for e in self.elements:
            e.validate(self.schema)
            if not e.valid:
                seen_invalid = True
            elif seen_invalid:
                raise LayoutError("valid element after invalid padding")

    @classmethod
    def from_valid_elements(
        cls, schema: AttributeSchema, elements: "list[Element] | tuple[Element, ...]"
    ) -> "Layout":
        """Pad a list of valid elements with invalid ones up to capacity."""
        elements = tuple(elements)
        if len(elements) > schema.element_capacity:
            raise LayoutError(
                f"{len(elements)} elements exceed capacity {schema.element_capacity}"
            )
        pad = (Element.invalid_for(schema),) * (
            schema.element_capacity - len(elements)
        )
        return cls(schema, elements + pad)

    @classmethod
    def empty(cls, schema: AttributeSchema) -> "Layout":
        return cls.from_valid_elements(schema, ())

    @property
    def valid_elements(self) -> tuple[Element, ...]:
        return tuple(e for e in self.elements if e.valid)

    @property
    def num_valid(self) -> int:
        return sum(1 for e in self.elements if e.valid)


def encode_one_hot(layout: Layout) -> np.ndarray:
    """Encode a layout as an N x sum(d_i + 1) binary matrix.

    Row n holds one 1 per attribute slice, at the attribute value (the
    sentinel slot for invalid elements).
    """
    schema = layout.schema
    m = np.zeros((schema.element_capacity, schema.one_hot_width), dtype=np.float32)
    offsets = schema.slot_offsets
    for n, e in enumerate(layout.elements):
        for i, v in enumerate(e.values):
            m[n, offsets[i] + v] = 1.0
    return m


def decode_one_hot(schema: AttributeSchema, matrix: np.ndarray) -> Layout:
    """Decode a (possibly soft) one-hot matrix back to a layout.

    Rows may hold arbitrary real scores; each attribute is taken as the
    per-slice argmax. A row decodes to an invalid element iff the class
    slice's argmax lands on the sentinel slot. For valid rows the remaining
    attributes argmax over the non-sentinel slots, and coordinates are
    clamped by swapping so that x_min <= x_max and y_min <= y_max. Valid
    elements are compacted to the front in their original order.
    """
    matrix = np.asarray(matrix)
    expect = (schema.element_capacity, schema.one_hot_width)
    if matrix.shape != expect:
        raise LayoutError(f"matrix shape {matrix.shape} != expected {expect}")
    offsets = schema.slot_offsets
    cls_i = schema.class_attribute_index
    xi0, yi0, xi1, yi1 = schema.coord_indices

    valid_elems: list[Element] = []
    for n in range(schema.element_capacity):
        row = matrix[n]
        cls_attr = schema.attributes[cls_i]
        cls_slice = row[offsets[cls_i] : offsets[cls_i] + cls_attr.slots]
        if int(np.argmax(cls_slice)) == cls_attr.cardinality:
            continue  # sentinel wins: invalid element
        values = []
        for i, a in enumerate(schema.attributes):
            sl = row[offsets[i] : offsets[i] + a.cardinality]  # sentinel excluded
            values.append(int(np.argmax(sl)))
        if values[xi0] > values[xi1]:
            values[xi0], values[xi1] = values[xi1], values[xi0]
        if values[yi0] > values[yi1]:
            values[yi0], values[yi1] = values[yi1], values[yi0]
        valid_elems.append(Element(tuple(values), valid=True))
    return Layout.from_valid_elements(schema, valid_elems)


def sort_canonical(layout: Layout) -> Layout:
    """Sort valid elements by (y_min, x_min, y_max, x_max, class); idempotent."""
    schema = layout.schema
    xi0, yi0, xi1, yi1 = schema.coord_indices

    def key(e: Element):
        v = e.values
        return (v[yi0], v[xi0], v[yi1], v[xi1], v[schema.class_attribute_index])

    ordered = sorted(layout.valid_elements, key=key)
    return Layout.from_valid_elements(schema, ordered)


def count_classes(layout: Layout) -> np.ndarray:
    """Per-class counts of valid elements, as a length-K integer vector."""
    counts = np.zeros(layout.schema.num_classes, dtype=np.int64)
    for e in layout.valid_elements:
        counts[e.class_id(layout.schema)] += 1
    return counts


# -- JSON interchange --------------------------------------------------------


def layout_to_json(layout: Layout) -> dict:
    """Serialize to the layout interchange form (valid elements only)."""
    schema = layout.schema
    elems = []
    for e in layout.valid_elements:
        rec = {a.name: int(v) for a, v in zip(schema.attributes, e.values)}
        rec["valid"] = True
        elems.append(rec)
    return {"schema": schema.name, "elements": elems}


def layout_from_json(obj: dict, schema: AttributeSchema) -> Layout:
    """Parse the interchange form; invalid records are dropped, order kept."""
    if not isinstance(obj, dict) or "elements" not in obj:
        raise LayoutError("layout JSON must be an object with an 'elements' list")
    if obj.get("schema") not in (None, schema.name):
        raise SchemaError(
            f"layout declares schema {obj.get('schema')!r}, expected {schema.name!r}"
        )
    elems = []
    for rec in obj["elements"]:
        if not rec.get("valid", True):
            continue
        try:
            values = tuple(int(rec[a.name]) for a in schema.attributes)
        except KeyError as e:
            raise LayoutError(f"element record missing attribute {e.args[0]!r}")
        elems.append(Element(values, valid=True))
    return Layout.from_valid_elements(schema, elems)
