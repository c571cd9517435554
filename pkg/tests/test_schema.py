import json

import pytest

from layoutdiff.schema import (
    Attribute,
    AttributeSchema,
    SchemaError,
    builtin_names,
    builtin_schema,
)


def test_builtin_registry():
    assert builtin_names() == ("mobile", "toy", "web")
    for name in builtin_names():
        assert builtin_schema(name).name == name
    with pytest.raises(SchemaError):
        builtin_schema("nope")


def test_toy_dimensions(toy):
    # 4 classes + 4 coordinates at resolution 64, one sentinel slot each.
    assert toy.num_attributes == 5
    assert toy.d_total == 4 + 4 * 64
    assert toy.one_hot_width == toy.d_total + toy.num_attributes
    assert toy.element_capacity == 16
    assert toy.resolution == 64


def test_slot_offsets_and_slices(toy):
    offsets = toy.slot_offsets
    assert offsets[0] == 0
    widths = [a.slots for a in toy.attributes]
    for i in range(1, len(offsets)):
        assert offsets[i] == offsets[i - 1] + widths[i - 1]
    for (lo, hi), a in zip(toy.slot_slices, toy.attributes):
        assert hi - lo == a.slots == a.cardinality + 1
    assert toy.slot_slices[-1][1] == toy.one_hot_width


def test_web_schema_has_style_attributes():
    web = builtin_schema("web")
    assert web.num_attributes == 16
    assert web.attribute("font_size").cardinality == 128
    assert web.resolution == 1024


def test_json_roundtrip(toy):
    again = AttributeSchema.from_json(json.loads(json.dumps(toy.to_json())))
    assert again == toy
    assert again.hash() == toy.hash()


def test_hash_distinguishes_schemas(toy):
    assert toy.hash() != builtin_schema("mobile").hash()


def test_attribute_lookup(toy):
    assert toy.attribute("class").cardinality == 4
    assert toy.attribute_index("x_min") == 1
    with pytest.raises(SchemaError):
        toy.attribute("nope")


def test_class_names(toy):
    assert toy.class_name(0) == "container"
    assert toy.class_name(3) == "button"
    mobile = builtin_schema("mobile")
    assert mobile.class_name(0)  # falls back to a generated name


def test_rejects_bad_construction():
    base = builtin_schema("toy")
    with pytest.raises(SchemaError):
        AttributeSchema(
            name="bad",
            attributes=base.attributes,
            num_classes=9,  # does not match the class attribute
            element_capacity=4,
            canvas_width=64,
            canvas_height=64,
        )
    with pytest.raises(SchemaError):
        AttributeSchema(
            name="bad",
            attributes=(Attribute("class", 2), Attribute("x_min", 1)),
            num_classes=2,
        )
    with pytest.raises(SchemaError):
        AttributeSchema(
            name="bad",
            attributes=(Attribute("class", 2),),  # coordinates missing
            num_classes=2,
        )
