"""Attribute schemas for layout datasets.

A schema declares the ordered discrete attributes of an element (class, four
box coordinates, optional style attributes), their cardinalities, the element
capacity of a layout, and the canvas size used for rendering. Every other
module is parameterized by a schema instance.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

COORD_NAMES = ("x_min", "y_min", "x_max", "y_max")

STYLE_NAMES = (
    "fg_r", "fg_g", "fg_b", "fg_a",
    "bg_r", "bg_g", "bg_b", "bg_a",
    "font_size", "font_weight", "alignment",
)


class SchemaError(ValueError):
    """Raised when a schema or a value under a schema is inconsistent."""


@dataclass(frozen=True)
class Attribute:
    """One discrete element attribute: `cardinality` valid values 0..d-1.

    The one-hot encoding reserves one extra slot (index `cardinality`) for the
    invalid-element sentinel, so each attribute occupies cardinality+1 slots.
    """

    name: str
    cardinality: int

    @property
    def slots(self) -> int:
        return self.cardinality + 1


@dataclass(frozen=True)
class AttributeSchema:
    """Declares the element attributes of a layout dataset.

    Attributes:
        name: identifier used in serialized layouts.
        attributes: ordered attribute declarations; must contain a class
            attribute and the four box coordinates.
        class_attribute_index: position of the class attribute.
        num_classes: class vocabulary size K.
        element_capacity: fixed sequence length N; layouts are padded with
            invalid elements up to it.
        canvas_width, canvas_height: rendering canvas in pixels.
        class_names: optional display names, one per class.
    """

    name: str
    attributes: tuple[Attribute, ...]
    num_classes: int
    element_capacity: int = 64
    canvas_width: int = 360
    canvas_height: int = 640
    class_attribute_index: int = 0
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.element_capacity < 1:
            raise SchemaError("element_capacity must be positive")
        if self.canvas_width < 1 or self.canvas_height < 1:
            raise SchemaError("canvas size must be positive")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate attribute names: {names}")
        for i, a in enumerate(self.attributes):
            if a.cardinality < 2:
                raise SchemaError(
                    f"attribute {i} ({a.name}): cardinality {a.cardinality} < 2"
                )
        if not (0 <= self.class_attribute_index < len(self.attributes)):
            raise SchemaError("class_attribute_index out of range")
        cls_attr = self.attributes[self.class_attribute_index]
        if cls_attr.cardinality != self.num_classes:
            raise SchemaError(
                f"class attribute cardinality {cls_attr.cardinality} "
                f"!= num_classes {self.num_classes}"
            )
        missing = [c for c in COORD_NAMES if c not in names]
        if missing:
            raise SchemaError(f"missing coordinate attributes: {missing}")
        coord_cards = {self.attribute(c).cardinality for c in COORD_NAMES}
        if len(coord_cards) != 1:
            raise SchemaError(
                f"coordinate attributes must share one cardinality, got {coord_cards}"
            )
        if self.class_names and len(self.class_names) != self.num_classes:
            raise SchemaError("class_names length must equal num_classes")

    # -- derived sizes ------------------------------------------------------

    @property
    def num_attributes(self) -> int:
        return len(self.attributes)

    @property
    def resolution(self) -> int:
        """Quantized axis resolution shared by the four coordinates."""
        return self.attribute("x_min").cardinality

    @property
    def d_total(self) -> int:
        """Sum of attribute cardinalities (without sentinel slots)."""
        return sum(a.cardinality for a in self.attributes)

    @property
    def one_hot_width(self) -> int:
        """Total one-hot row width: one sentinel slot per attribute."""
        return sum(a.slots for a in self.attributes)

    @property
    def slot_offsets(self) -> tuple[int, ...]:
        """Start column of each attribute's slice in the one-hot row."""
        offsets = []
        pos = 0
        for a in self.attributes:
            offsets.append(pos)
            pos += a.slots
        return tuple(offsets)

    @property
    def slot_slices(self) -> tuple[tuple[int, int], ...]:
        """(start, end) column of each attribute's slice in the one-hot row."""
        return tuple(
            (lo, lo + a.slots) for lo, a in zip(self.slot_offsets, self.attributes)
        )

    # -- lookups ------------------------------------------------------------

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"no attribute named {name!r}")

    def attribute_index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise SchemaError(f"no attribute named {name!r}")

    @property
    def coord_indices(self) -> tuple[int, int, int, int]:
        return tuple(self.attribute_index(c) for c in COORD_NAMES)

    def class_name(self, class_id: int) -> str:
        if self.class_names:
            return self.class_names[class_id]
        return f"class_{class_id:02d}"

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "attributes": [[a.name, a.cardinality] for a in self.attributes],
            "num_classes": self.num_classes,
            "element_capacity": self.element_capacity,
            "canvas_width": self.canvas_width,
            "canvas_height": self.canvas_height,
            "class_attribute_index": self.class_attribute_index,
            "class_names": list(self.class_names),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AttributeSchema":
        return cls(
            name=obj["name"],
            attributes=tuple(Attribute(n, int(d)) for n, d in obj["attributes"]),
            num_classes=int(obj["num_classes"]),
            element_capacity=int(obj["element_capacity"]),
            canvas_width=int(obj["canvas_width"]),
            canvas_height=int(obj["canvas_height"]),
            class_attribute_index=int(obj.get("class_attribute_index", 0)),
            class_names=tuple(obj.get("class_names", ())),
        )

    def hash(self) -> str:
        """Stable content hash used to guard checkpoint/schema compatibility."""
        canon = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _base_attributes(num_classes: int, resolution: int) -> tuple[Attribute, ...]:
    return (Attribute("class", num_classes),) + tuple(
        Attribute(c, resolution) for c in COORD_NAMES
    )


def _style_attributes() -> tuple[Attribute, ...]:
    cards = {"font_size": 128, "font_weight": 9, "alignment": 9}
    return tuple(Attribute(n, cards.get(n, 256)) for n in STYLE_NAMES)


_BUILTINS: dict[str, AttributeSchema] = {}


def _register(schema: AttributeSchema) -> AttributeSchema:
    _BUILTINS[schema.name] = schema
    return schema


TOY_CLASS_NAMES = ("container", "image", "text", "button")

#: Desk-scale schema used throughout the test suite.
TOY = _register(
    AttributeSchema(
        name="toy",
        attributes=_base_attributes(4, 64),
        num_classes=4,
        element_capacity=16,
        canvas_width=256,
        canvas_height=256,
        class_names=TOY_CLASS_NAMES,
    )
)

#: Mobile-app style schema: 24 element classes, coarse coordinates.
MOBILE = _register(
    AttributeSchema(
        name="mobile",
        attributes=_base_attributes(24, 64),
        num_classes=24,
        element_capacity=64,
        canvas_width=360,
        canvas_height=640,
    )
)

#: Webpage style schema: 16 attributes including colors and typography.
WEB = _register(
    AttributeSchema(
        name="web",
        attributes=_base_attributes(4, 1024) + _style_attributes(),
        num_classes=4,
        element_capacity=64,
        canvas_width=1024,
        canvas_height=1024,
        class_names=("container", "image", "text", "button"),
    )
)


def builtin_schema(name: str) -> AttributeSchema:
    """Look up a built-in schema by name."""
    try:
        return _BUILTINS[name]
    except KeyError:
        raise SchemaError(
            f"unknown schema {name!r}; built-ins: {sorted(_BUILTINS)}"
        ) from None


def builtin_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILTINS))
