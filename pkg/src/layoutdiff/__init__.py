"""Multi-conditional latent diffusion for layout generation.

Layouts are fixed-length sequences of rectangular elements with discrete
attributes. A first-stage VAE maps them to a compact per-element latent
sequence, a transformer denoiser generates in that space conditioned on any
subset of {text prompt, class counts, given design, guidelines}, and a set of
metrics scores sample quality and condition satisfaction.
"""

__version__ = "0.1.0"

from layoutdiff.schema import AttributeSchema, builtin_schema
from layoutdiff.layouts import (
    Element,
    Layout,
    count_classes,
    decode_one_hot,
    encode_one_hot,
    sort_canonical,
)
from layoutdiff.conditions import (
    ConditionSet,
    DropoutPolicy,
    Guideline,
    Prompt,
    WeightedGuideline,
    apply_dropout,
    extract_guidelines,
    sample_guidelines,
    subset_class_count,
    subset_given_design,
    subset_prompt,
)

__all__ = [
    "AttributeSchema",
    "builtin_schema",
    "Element",
    "Layout",
    "encode_one_hot",
    "decode_one_hot",
    "sort_canonical",
    "count_classes",
    "Guideline",
    "WeightedGuideline",
    "Prompt",
    "ConditionSet",
    "DropoutPolicy",
    "extract_guidelines",
    "sample_guidelines",
    "subset_given_design",
    "subset_class_count",
    "subset_prompt",
    "apply_dropout",
]
