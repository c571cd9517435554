import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_layout
from layoutdiff.conditions import (
    CONDITION_NAMES,
    ConditionError,
    ConditionSet,
    DropoutPolicy,
    Guideline,
    Prompt,
    WeightedGuideline,
    apply_dropout,
    condition_set_from_json,
    condition_set_to_json,
    conditions_from_layout,
    extract_guidelines,
    guideline_positions,
    sample_guidelines,
    subset_class_count,
    subset_given_design,
    subset_prompt,
)
from layoutdiff.layouts import Element, Layout
from layoutdiff.rng import rng_from
from layoutdiff.schema import builtin_schema


def test_condition_names_order():
    assert CONDITION_NAMES == ("prompt", "class_count", "given_design", "guidelines")


def test_guideline_validation():
    with pytest.raises(ConditionError):
        Guideline("z", 3)
    with pytest.raises(ConditionError):
        Guideline("x", -1)
    assert Guideline("x", 0) < Guideline("y", 0)


def test_prompt_tokens():
    p = Prompt(("Two Buttons, one image.", "A header."))
    assert p.tokens() == ["two", "buttons", "one", "image", "a", "header"]
    assert p.text == "Two Buttons, one image. A header."
    with pytest.raises(ConditionError):
        Prompt(())


def test_present_names(toy):
    cs = ConditionSet(class_count=(1, 0, 0, 0), guidelines=(Guideline("x", 3),))
    assert cs.present_names == ("class_count", "guidelines")
    # an explicitly empty guideline tuple counts as absent
    assert ConditionSet(guidelines=()).present_names == ()
    assert ConditionSet().present_names == ()


def test_without(toy):
    cs = ConditionSet(
        prompt=Prompt(("a",)),
        class_count=(1, 0, 0, 0),
        guidelines=(Guideline("x", 1),),
    )
    rest = cs.without(["prompt", "guidelines"])
    assert rest.present_names == ("class_count",)


def test_extract_guidelines_weights(toy):
    # two stacked boxes sharing the x edges: x weights accumulate both heights
    a = Element((0, 4, 0, 10, 4))   # height 5
    b = Element((1, 4, 5, 10, 11))  # height 7
    layout = Layout.from_valid_elements(toy, [a, b])
    gs = extract_guidelines(layout)
    by_key = {(wg.guideline.axis, wg.guideline.position): wg.weight for wg in gs}
    assert by_key[("x", 4)] == 5 + 7
    assert by_key[("x", 10)] == 5 + 7
    assert by_key[("y", 0)] == 7   # width of box a
    assert by_key[("y", 4)] == 7
    assert by_key[("y", 5)] == 7   # box b edges
    assert by_key[("y", 11)] == 7
    # sorted x-first then by position
    keys = [(wg.guideline.axis, wg.guideline.position) for wg in gs]
    assert keys == sorted(keys)


def test_extract_guidelines_shared_edge_dedup(toy):
    # a box with x_min == x_max projects one X guideline with doubled weight
    e = Element((0, 7, 2, 7, 9))
    gs = extract_guidelines(Layout.from_valid_elements(toy, [e]))
    by_key = {(wg.guideline.axis, wg.guideline.position): wg.weight for wg in gs}
    assert by_key[("x", 7)] == 2 * 8  # both vertical edges, height 8 each


def test_guideline_positions_match_extract(toy, rng):
    layout = random_layout(toy, rng, num_elements=6)
    assert guideline_positions(layout) == tuple(
        wg.guideline for wg in extract_guidelines(layout)
    )


def test_sample_guidelines_determinism_and_bounds(toy, rng):
    layout = random_layout(toy, rng, num_elements=8)
    gs = extract_guidelines(layout)
    kept1 = sample_guidelines(gs, 0.5, seed=11)
    kept2 = sample_guidelines(gs, 0.5, seed=11)
    assert kept1 == kept2
    assert set(kept1) <= {wg.guideline for wg in gs}
    assert sample_guidelines((), 0.5, seed=0) == ()
    assert sample_guidelines(gs, 1.0, seed=0) == tuple(wg.guideline for wg in gs)
    with pytest.raises(ConditionError):
        sample_guidelines(gs, 0.0, seed=0)
    with pytest.raises(ConditionError):
        sample_guidelines((WeightedGuideline(Guideline("x", 1), 0),), 0.5, seed=0)


def test_sample_guidelines_weight_bias():
    # heavier guidelines are kept more often: empirical rates reflect p^(mean/w)
    gs = (
        WeightedGuideline(Guideline("x", 1), 1),
        WeightedGuideline(Guideline("x", 2), 9),
    )
    hits = np.zeros(2)
    trials = 20000
    for s in range(trials):
        kept = sample_guidelines(gs, 0.3, seed=s)
        for i, wg in enumerate(gs):
            hits[i] += wg.guideline in kept
    mean_w = 5.0
    expect = [0.3 ** (mean_w / 1), 0.3 ** (mean_w / 9)]
    assert np.allclose(hits / trials, expect, atol=0.02)


def test_subset_given_design(toy, rng):
    layout = random_layout(toy, rng, num_elements=8)
    half = subset_given_design(layout, 0.5, seed=3)
    assert half.num_valid == 4
    assert subset_given_design(layout, 0.5, seed=3) == half
    # order preserved
    orig = list(layout.valid_elements)
    kept = list(half.valid_elements)
    assert sorted(map(orig.index, kept)) == list(map(orig.index, kept))
    assert subset_given_design(layout, 1.0, seed=0) == layout
    assert subset_given_design(layout, 0.0, seed=0).num_valid == 0
    with pytest.raises(ConditionError):
        subset_given_design(layout, 1.5, seed=0)


def test_subset_rounding(toy, rng):
    layout = random_layout(toy, rng, num_elements=3)
    # floor(0.5 * 3 + 0.5) = 2
    assert subset_given_design(layout, 0.5, seed=1).num_valid == 2


def test_subset_class_count():
    counts = (3, 0, 2, 1)
    out = subset_class_count(counts, seed=5)
    assert out == subset_class_count(counts, seed=5)
    assert all(o in (0, c) for o, c in zip(out, counts))
    assert subset_class_count((0, 0), seed=1) == (0, 0)
    with pytest.raises(ConditionError):
        subset_class_count((-1, 2), seed=0)


def test_subset_prompt_never_empty():
    p = Prompt(("a", "b", "c"))
    for s in range(200):
        sub = subset_prompt(p, seed=s, keep_prob=0.01)
        assert len(sub.sentences) >= 1
        assert set(sub.sentences) <= set(p.sentences)


def test_apply_dropout_all_or_each():
    cs = ConditionSet(
        prompt=Prompt(("a",)),
        class_count=(1, 0, 0, 0),
        guidelines=(Guideline("x", 1),),
    )
    # p_cfg = 1: always the empty set
    assert apply_dropout(cs, DropoutPolicy(p_cfg=1.0, p_cond=0.0, seed=0)) == ConditionSet()
    # p_cfg = 0, p_cond = 0: unchanged
    assert apply_dropout(cs, DropoutPolicy(p_cfg=0.0, p_cond=0.0, seed=0)) == cs
    # p_cond = 1: everything dropped individually
    assert (
        apply_dropout(cs, DropoutPolicy(p_cfg=0.0, p_cond=1.0, seed=0)).present_names == ()
    )


def test_apply_dropout_joint_rate():
    # joint all-absent frequency = p_cfg + (1 - p_cfg) * p_cond^4
    cs = ConditionSet(
        prompt=Prompt(("a",)),
        class_count=(1, 1, 0, 0),
        guidelines=(Guideline("y", 2),),
        given_design=Layout.from_valid_elements(
            builtin_schema("toy"), [Element((0, 0, 0, 1, 1))]
        ),
    )
    policy = DropoutPolicy(p_cfg=0.1, p_cond=0.5, seed=0)
    rng = rng_from(99)
    trials = 100000
    all_absent = 0
    for _ in range(trials):
        out = apply_dropout(cs, policy, rng)
        all_absent += out.present_names == ()
    expect = 0.1 + 0.9 * 0.5**4
    assert abs(all_absent / trials - expect) < 0.01


def test_dropout_policy_validation():
    with pytest.raises(ConditionError):
        DropoutPolicy(p_cfg=1.5)
    with pytest.raises(ConditionError):
        DropoutPolicy(p_cond=-0.1)


def test_condition_set_json_roundtrip(toy, rng):
    layout = random_layout(toy, rng, num_elements=4)
    cs = conditions_from_layout(layout)
    blob = json.loads(json.dumps(condition_set_to_json(cs)))
    again = condition_set_from_json(blob, toy)
    assert again == cs
    # all-absent roundtrip
    empty = condition_set_from_json(
        json.loads(json.dumps(condition_set_to_json(ConditionSet()))), toy
    )
    assert empty == ConditionSet()


def test_condition_set_json_validation(toy):
    with pytest.raises(ConditionError):
        condition_set_from_json({"class_count": [1, 2]}, toy)
    with pytest.raises(ConditionError):
        condition_set_from_json(
            {"guidelines": [{"axis": "x", "pos": 64}]}, toy
        )
    with pytest.raises(ConditionError):
        condition_set_from_json([1, 2], toy)


def test_conditions_from_layout(toy, rng):
    layout = random_layout(toy, rng, num_elements=5)
    cs = conditions_from_layout(layout)
    assert cs.given_design == layout
    assert cs.class_count == tuple(
        int(c) for c in np.bincount(
            [e.class_id(toy) for e in layout.valid_elements], minlength=4
        )
    )
    assert cs.guidelines == guideline_positions(layout)
    assert cs.prompt is not None


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), frac=st.floats(0.0, 1.0))
def test_subset_given_design_size_property(seed, frac):
    toy = builtin_schema("toy")
    rng = np.random.default_rng(seed)
    layout = random_layout(toy, rng)
    sub = subset_given_design(layout, frac, seed)
    n = layout.num_valid
    assert sub.num_valid == min(n, int(np.floor(frac * n + 0.5)))
    assert set(sub.valid_elements) <= set(layout.valid_elements)
