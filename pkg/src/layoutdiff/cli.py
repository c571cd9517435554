"""Command-line lifecycle: corpus, training, sampling, evaluation, serving.

Exit codes are machine-parseable: 0 on success, 2 on validation errors, 3 on
missing artifacts (files or directories). Relative artifact paths resolve
under $COLAY_HOME when it is set. Each successful command prints one JSON
object to stdout; errors go to stderr as {"error": code, "detail": message}.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np
import torch

from layoutdiff.checkpoint import (
    CheckpointError,
    load_diffusion_checkpoint,
    load_vae_checkpoint,
    save_diffusion_checkpoint,
    save_vae_checkpoint,
)
from layoutdiff.conditions import (
    CONDITION_NAMES,
    ConditionSet,
    condition_set_from_json,
    condition_set_to_json,
    guideline_positions,
    subset_given_design,
)
from layoutdiff.data import SynthSpec, generate_corpus, load_pairs, save_pairs, split_corpus, stats
from layoutdiff.denoiser import DenoiserConfig
from layoutdiff.layouts import count_classes, layout_to_json, sort_canonical
from layoutdiff.metrics import (
    EvalCorpus,
    RandomConvFeatures,
    c_usage,
    cyc_sim_l,
    cyc_sim_p,
    design_distance,
    frechet_distance,
    g_usage,
)
from layoutdiff.rendering import render, save_png
from layoutdiff.rng import derive_seed
from layoutdiff.sampler import GuidanceConfig, resolve_guidance, sample_batch
from layoutdiff.schema import builtin_names, builtin_schema
from layoutdiff.training import (
    DiffusionTrainConfig,
    TrainingError,
    VaeTrainConfig,
    train_diffusion,
    train_vae,
)
from layoutdiff.vae import VaeConfig

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_MISSING = 3

REPORT_VERSION = 1

#: Metric applicability by condition, mirrored in eval reports.
METRIC_CONDITIONS = {
    "fid": None,
    "cyc_sim_p": "prompt",
    "cyc_sim_l": "prompt",
    "c_usage": "class_count",
    "design_distance": "given_design",
    "g_usage": "guidelines",
}

_MODE_ALIASES = {
    "p": "prompt",
    "c": "class_count",
    "e": "given_design",
    "g": "guidelines",
}


def _resolve(path: str | None) -> str | None:
    """Relative artifact paths live under $COLAY_HOME when it is set."""
    if path is None:
        return None
    home = os.environ.get("COLAY_HOME")
    if home and not os.path.isabs(path):
        return os.path.join(home, path)
    return path


def _emit(obj: dict) -> None:
    print(json.dumps(obj, sort_keys=True))


def _load_schema(name: str):
    if name in builtin_names():
        return builtin_schema(name)
    path = _resolve(name)
    if not os.path.exists(path):
        raise FileNotFoundError(f"schema {name!r} is neither built-in nor a file")
    from layoutdiff.schema import AttributeSchema

    with open(path) as f:
        return AttributeSchema.from_json(json.load(f))


def _require_file(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------------------
# Commands


def cmd_make_corpus(args) -> int:
    schema = _load_schema(args.schema)
    out = _resolve(args.out)
    spec = SynthSpec(schema=schema, size=args.count, seed=args.seed)
    items = generate_corpus(spec)
    train, held = split_corpus(items, args.eval_fraction, seed=args.seed)
    save_pairs(os.path.join(out, "train"), train)
    save_pairs(os.path.join(out, "eval"), held)
    spec_json = dataclasses.asdict(spec)
    spec_json["schema"] = schema.name
    with open(os.path.join(out, "spec.json"), "w") as f:
        json.dump(spec_json, f, sort_keys=True, indent=2)
    _emit(
        {
            "out": out,
            "train_size": len(train),
            "eval_size": len(held),
            "schema": schema.name,
        }
    )
    return EXIT_OK


def cmd_stats(args) -> int:
    schema = _load_schema(args.schema)
    corpus = _require_file(_resolve(args.corpus), "corpus")
    pairs = load_pairs(corpus, schema)
    st = stats([p[0] for p in pairs])
    _emit(
        {
            "size": len(pairs),
            "element_count_hist": {str(k): st.element_count_hist[k] for k in sorted(st.element_count_hist)},
            "class_frequencies": {
                schema.class_name(k): c for k, c in enumerate(st.class_frequencies)
            },
        }
    )
    return EXIT_OK


def cmd_train_vae(args) -> int:
    schema = _load_schema(args.schema)
    corpus = _require_file(_resolve(args.corpus), "corpus")
    pairs = load_pairs(corpus, schema)
    vae_config = VaeConfig.desk() if args.model_scale == "desk" else VaeConfig()
    if args.kl_weight is not None:
        vae_config = dataclasses.replace(vae_config, kl_weight=args.kl_weight)
    config = VaeTrainConfig(
        steps=args.steps,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=args.seed,
        log_every=args.log_every,
    )
    resume = None
    start = 0
    if args.resume:
        vae, extras = load_vae_checkpoint(_require_file(_resolve(args.resume), "checkpoint"), schema)
        resume = (vae, extras)
        start = extras.get("step", 0)
    vae, history = train_vae(
        schema,
        [p[0] for p in pairs],
        vae_config,
        config,
        log_path=_resolve(args.log),
        resume=resume,
    )
    out = _resolve(args.out)
    save_vae_checkpoint(out, vae, step=start + args.steps)
    _emit(
        {
            "checkpoint": out,
            "steps": start + args.steps,
            "first_loss": history[0]["total"],
            "final_loss": history[-1]["total"],
        }
    )
    return EXIT_OK


def cmd_train_diffusion(args) -> int:
    schema = _load_schema(args.schema)
    corpus = _require_file(_resolve(args.corpus), "corpus")
    pairs = load_pairs(corpus, schema)
    if args.canonical_order:
        pairs = [(sort_canonical(l), p) for l, p in pairs]
    denoiser_config = DenoiserConfig.desk() if args.model_scale == "desk" else DenoiserConfig()
    if args.positional:
        denoiser_config = dataclasses.replace(denoiser_config, positional_encoding=True)
    resume = None
    start = 0
    if args.resume:
        bundle, extras = load_diffusion_checkpoint(
            _require_file(_resolve(args.resume), "checkpoint"), schema
        )
        resume = (bundle, extras)
        vae = bundle.vae
        start = extras.get("step", 0)
    else:
        if not args.checkpoint:
            raise ValueError(
                "train-diffusion needs the stage-one VAE via --checkpoint (or --resume)"
            )
        vae, _ = load_vae_checkpoint(_require_file(_resolve(args.checkpoint), "VAE checkpoint"), schema)
    config = DiffusionTrainConfig(
        steps=args.steps,
        batch_size=args.batch_size,
        lr=args.lr,
        timesteps=args.timesteps,
        p_cfg=args.p_cfg,
        p_cond=args.p_cond,
        seed=args.seed,
        log_every=args.log_every,
    )
    bundle, history = train_diffusion(
        schema,
        pairs,
        vae,
        denoiser_config,
        config,
        log_path=_resolve(args.log),
        resume=resume,
    )
    out = _resolve(args.out)
    policy = {"p_cfg": config.p_cfg, "p_cond": config.p_cond}
    save_diffusion_checkpoint(out, bundle, step=start + args.steps, policy=policy)
    _emit(
        {
            "checkpoint": out,
            "steps": start + args.steps,
            "first_loss": history[0]["loss"],
            "final_loss": history[-1]["loss"],
            "latent_scale": bundle.latent_scale,
        }
    )
    return EXIT_OK


def cmd_sample(args) -> int:
    schema = _load_schema(args.schema)
    bundle, _ = load_diffusion_checkpoint(
        _require_file(_resolve(args.checkpoint), "checkpoint"), schema
    )
    if args.conditions:
        with open(_require_file(_resolve(args.conditions), "conditions file")) as f:
            cs = condition_set_from_json(json.load(f), schema)
    else:
        cs = ConditionSet()
    weights = resolve_guidance(args.preset, cs.present_names)
    gc = GuidanceConfig(weights=weights, steps=args.steps, seed=args.seed)
    layouts = sample_batch(bundle, [cs] * args.count, gc)

    out = _resolve(args.out)
    os.makedirs(out, exist_ok=True)
    names = []
    for i, layout in enumerate(layouts):
        stem = f"layout_{i:03d}"
        with open(os.path.join(out, stem + ".json"), "w") as f:
            f.write(json.dumps(layout_to_json(layout), sort_keys=True, separators=(",", ":")) + "\n")
        save_png(render(layout), os.path.join(out, stem + ".png"))
        names.append(stem)
    manifest = {
        "schema": schema.name,
        "preset": args.preset,
        "weights": weights,
        "steps": args.steps,
        "seed": args.seed,
        "count": args.count,
        "layouts": names,
    }
    with open(os.path.join(out, "manifest.json"), "w") as f:
        f.write(json.dumps(manifest, sort_keys=True, separators=(",", ":")) + "\n")
    _emit({"out": out, "count": len(layouts)})
    return EXIT_OK


def _parse_mode(mode: str) -> tuple[str, ...]:
    mode = mode.strip().lower()
    if mode == "all":
        return CONDITION_NAMES
    if mode in ("unconditional", "none"):
        return ()
    names = []
    for token in mode.replace(",", "+").split("+"):
        token = token.strip()
        token = _MODE_ALIASES.get(token, token)
        if token not in CONDITION_NAMES:
            raise ValueError(
                f"unknown condition {token!r} in --conditions-mode; "
                f"expected subset of {CONDITION_NAMES}, 'all', or 'unconditional'"
            )
        if token in names:
            raise ValueError(f"duplicate condition {token!r} in --conditions-mode")
        names.append(token)
    return tuple(n for n in CONDITION_NAMES if n in names)


def _eval_conditions(layout, prompt, wanted: tuple[str, ...], seed: int) -> ConditionSet:
    given = None
    if "given_design" in wanted and layout.num_valid > 0:
        given = subset_given_design(layout, 0.5, derive_seed(seed, 1))
    guides = None
    if "guidelines" in wanted:
        positions = guideline_positions(layout)
        guides = positions if positions else None
    return ConditionSet(
        prompt=prompt if "prompt" in wanted else None,
        class_count=(
            tuple(int(c) for c in count_classes(layout)) if "class_count" in wanted else None
        ),
        given_design=given,
        guidelines=guides,
    )


def cmd_eval(args) -> int:
    if args.count < 2:
        raise ValueError("--count must be at least 2 for distribution metrics")
    schema = _load_schema(args.schema)
    bundle, _ = load_diffusion_checkpoint(
        _require_file(_resolve(args.checkpoint), "checkpoint"), schema
    )
    corpus_dir = _require_file(_resolve(args.corpus), "eval corpus")
    extractor = RandomConvFeatures()
    if os.path.exists(os.path.join(corpus_dir, "features.bin")):
        corpus = EvalCorpus.load(corpus_dir, schema, extractor)
    else:
        pairs = load_pairs(corpus_dir, schema)
        corpus = EvalCorpus.build([p[0] for p in pairs], [p[1] for p in pairs], extractor)

    wanted = _parse_mode(args.conditions_mode)
    cs_list = [
        _eval_conditions(
            corpus.layouts[i % len(corpus)],
            corpus.prompts[i % len(corpus)],
            wanted,
            derive_seed(args.seed, i),
        )
        for i in range(args.count)
    ]

    # Named preset tables key on the present-condition combination, so items
    # are grouped by presence pattern; patterns get disjoint seed streams.
    groups: dict[tuple[str, ...], list[int]] = {}
    for i, cs in enumerate(cs_list):
        groups.setdefault(cs.present_names, []).append(i)
    layouts = [None] * len(cs_list)
    for gi, pattern in enumerate(sorted(groups)):
        idx = groups[pattern]
        gc = GuidanceConfig(
            weights=resolve_guidance(args.preset, pattern),
            steps=args.steps,
            seed=derive_seed(args.seed, 0xE7A1, gi),
        )
        for i, layout in zip(idx, sample_batch(bundle, [cs_list[i] for i in idx], gc)):
            layouts[i] = layout

    size = extractor.raster_size
    gen_feats = extractor.extract_batch([render(l, size, size) for l in layouts])
    metrics: dict[str, float] = {"fid": frechet_distance(corpus.features, gen_feats)}
    k = min(100, len(corpus))

    per_metric: dict[str, list[float]] = {m: [] for m in METRIC_CONDITIONS if m != "fid"}
    for cs, layout in zip(cs_list, layouts):
        if cs.prompt is not None:
            per_metric["cyc_sim_p"].append(cyc_sim_p(cs.prompt, layout, corpus, k))
            per_metric["cyc_sim_l"].append(cyc_sim_l(cs.prompt, layout, corpus, k))
        if cs.class_count is not None:
            per_metric["c_usage"].append(c_usage(np.asarray(cs.class_count), layout))
        if cs.given_design is not None:
            per_metric["design_distance"].append(design_distance(cs.given_design, layout))
        if cs.guidelines is not None:
            per_metric["g_usage"].append(g_usage(cs.guidelines, layout))

    not_applicable = []
    for name, values in per_metric.items():
        if values:
            metrics[name] = float(np.mean(values))
        else:
            not_applicable.append(name)

    report = {
        "report_version": REPORT_VERSION,
        "schema": schema.name,
        "mode": args.conditions_mode,
        "conditions": list(wanted),
        "count": args.count,
        "corpus_size": len(corpus),
        "k": k,
        "seed": args.seed,
        "preset": args.preset,
        "steps": args.steps,
        "metrics": metrics,
        "not_applicable": sorted(not_applicable),
    }
    out = _resolve(args.out)
    if out:
        with open(out, "w") as f:
            json.dump(report, f, sort_keys=True, indent=2)
            f.write("\n")
    _emit(report)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from layoutdiff.service import create_app

    schema = _load_schema(args.schema)
    bundle = None
    if args.checkpoint:
        bundle, _ = load_diffusion_checkpoint(
            _require_file(_resolve(args.checkpoint), "checkpoint"), schema
        )
    elif not args.dev_sampler:
        raise ValueError("serve needs --checkpoint or --dev-sampler")
    app = create_app(
        schema,
        bundle=bundle,
        dev=args.dev_sampler,
        session_log=_resolve(args.session_log),
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutdiff",
        description="Train, sample, evaluate, and serve conditional layout diffusion models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, corpus=False, checkpoint=False, out=False, steps=None):
        p.add_argument("--schema", default="toy", help="built-in schema name or JSON file")
        p.add_argument("--seed", type=int, default=0)
        if corpus:
            p.add_argument("--corpus", required=True, help="corpus directory")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="checkpoint path")
        if out:
            p.add_argument("--out", required=True, help="output path")
        if steps is not None:
            p.add_argument("--steps", type=int, default=steps)

    p = sub.add_parser("make-corpus", help="generate a synthetic corpus with train/eval split")
    common(p, out=True)
    p.add_argument("--count", type=int, default=5000)
    p.add_argument("--eval-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_make_corpus)

    p = sub.add_parser("stats", help="element-count and class-frequency statistics")
    common(p, corpus=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train-vae", help="stage one: train the layout VAE")
    common(p, corpus=True, out=True, steps=1500)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--kl-weight", type=float, default=None)
    p.add_argument("--model-scale", choices=("desk", "full"), default="desk")
    p.add_argument("--log", default=None, help="JSONL loss log path")
    p.add_argument("--log-every", type=int, default=50)
    p.add_argument("--resume", default=None, help="VAE checkpoint to continue from")
    p.set_defaults(func=cmd_train_vae)

    p = sub.add_parser("train-diffusion", help="stage two: train denoiser + condition encoders")
    common(p, corpus=True, checkpoint=False, out=True, steps=3000)
    p.add_argument("--checkpoint", default=None, help="stage-one VAE checkpoint")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--timesteps", type=int, default=100)
    p.add_argument("--p-cfg", type=float, default=0.1)
    p.add_argument("--p-cond", type=float, default=0.5)
    p.add_argument("--model-scale", choices=("desk", "full"), default="desk")
    p.add_argument(
        "--canonical-order",
        action="store_true",
        help="sort each training layout's elements into canonical order",
    )
    p.add_argument(
        "--positional",
        action="store_true",
        help="give the denoiser learned positional embeddings over its token sequence",
    )
    p.add_argument("--log", default=None, help="JSONL loss log path")
    p.add_argument("--log-every", type=int, default=50)
    p.add_argument("--resume", default=None, help="diffusion checkpoint to continue from")
    p.set_defaults(func=cmd_train_diffusion)

    p = sub.add_parser("sample", help="sample layouts from a trained model")
    common(p, checkpoint=True, out=True)
    p.add_argument("--conditions", default=None, help="ConditionSet JSON file")
    p.add_argument("--preset", default="single:2.5", help="guidance preset")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--steps", type=int, default=None, help="respaced sampling steps")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="metric report against an evaluation corpus")
    common(p, corpus=True, checkpoint=True)
    p.add_argument("--conditions-mode", default="all", help="all | unconditional | e.g. guidelines+prompt")
    p.add_argument("--preset", default="single:2.5")
    p.add_argument("--count", type=int, default=256)
    p.add_argument("--steps", type=int, default=None, help="respaced sampling steps")
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="HTTP generation service")
    common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--dev-sampler", action="store_true", help="serve without a model (grid sampler)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8710)
    p.add_argument("--session-log", default=None, help="JSONL session persistence path")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    torch.set_num_threads(1)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(json.dumps({"error": "missing-artifact", "detail": str(exc)}), file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, TrainingError, CheckpointError) as exc:
        print(json.dumps({"error": "validation", "detail": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
