#!/usr/bin/env python3
"""Condition-dropout sweep: does per-condition dropout help joint conditioning?

Trains two denoisers on the same VAE — one that only ever sees all-or-nothing
condition dropout (p_cond=0) and one with independent per-condition dropout
(p_cond=0.5) — then scores both on the all-conditions setting. Expected
direction: p_cond=0.5 gives the lower distribution distance, because it is the
only one trained on partial condition subsets.

Not part of the test gate; takes roughly two hours on one CPU core.

Usage: python3 scripts/pcond_sweep.py [--workdir runs/pcond] [--steps 6000]
"""
import argparse
import json
import pathlib
import sys

from layoutdiff.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="runs/pcond")
    ap.add_argument("--count", type=int, default=5000)
    ap.add_argument("--vae-steps", type=int, default=3000)
    ap.add_argument("--steps", type=int, default=6000)
    ap.add_argument("--eval-count", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    work = pathlib.Path(args.workdir)
    corpus = work / "corpus"
    if not (corpus / "train" / "layouts.jsonl").exists():
        code = main([
            "make-corpus", "--schema", "toy", "--out", str(corpus),
            "--count", str(args.count), "--seed", str(args.seed),
        ])
        if code:
            return code
    if not (work / "vae.pt").exists():
        code = main([
            "train-vae", "--schema", "toy", "--corpus", str(corpus / "train"),
            "--out", str(work / "vae.pt"), "--steps", str(args.vae_steps),
            "--seed", str(args.seed),
        ])
        if code:
            return code

    results = {}
    for p_cond in ("0.0", "0.5"):
        tag = f"pcond{p_cond}"
        ckpt = work / f"diffusion_{tag}.pt"
        code = main([
            "train-diffusion", "--schema", "toy",
            "--corpus", str(corpus / "train"),
            "--checkpoint", str(work / "vae.pt"),
            "--out", str(ckpt),
            "--steps", str(args.steps),
            "--p-cond", p_cond,
            "--seed", str(args.seed),
        ])
        if code:
            return code
        report_path = work / f"eval_{tag}.json"
        code = main([
            "eval", "--schema", "toy",
            "--checkpoint", str(ckpt),
            "--corpus", str(corpus / "eval"),
            "--conditions-mode", "all",
            "--count", str(args.eval_count),
            "--steps", "50",
            "--seed", str(args.seed),
            "--out", str(report_path),
        ])
        if code:
            return code
        results[p_cond] = json.loads(report_path.read_text())["metrics"]

    print("p_cond\tfid\tc_usage\tg_usage\tdesign_distance")
    for p_cond, metrics in results.items():
        print(
            f"{p_cond}\t{metrics['fid']:.4f}\t{metrics.get('c_usage', float('nan')):.4f}"
            f"\t{metrics.get('g_usage', float('nan')):.4f}"
            f"\t{metrics.get('design_distance', float('nan')):.4f}"
        )
    better = min(results, key=lambda p: results[p]["fid"])
    print(f"lower distribution distance with per-condition dropout p_cond={better}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
