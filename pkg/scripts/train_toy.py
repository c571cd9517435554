#!/usr/bin/env python3
"""Train the full toy stack: corpus -> VAE -> conditional denoiser.

Reproduces the configuration the acceptance suite pins. Artifacts land in
--workdir (default runs/toy): corpus/, vae.pt, diffusion.pt, and JSONL loss
logs. Takes roughly 25 minutes on one CPU core.

Usage: python3 scripts/train_toy.py [--workdir runs/toy] [--vae-steps N] ...
"""
import argparse
import pathlib
import sys

from layoutdiff.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="runs/toy")
    ap.add_argument("--count", type=int, default=5000)
    ap.add_argument("--vae-steps", type=int, default=3000)
    ap.add_argument("--diffusion-steps", type=int, default=8000)
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

    code = main([
        "train-vae", "--schema", "toy",
        "--corpus", str(corpus / "train"),
        "--out", str(work / "vae.pt"),
        "--steps", str(args.vae_steps),
        "--seed", str(args.seed),
        "--log", str(work / "vae_loss.jsonl"),
    ])
    if code:
        return code

    return main([
        "train-diffusion", "--schema", "toy",
        "--corpus", str(corpus / "train"),
        "--checkpoint", str(work / "vae.pt"),
        "--out", str(work / "diffusion.pt"),
        "--steps", str(args.diffusion_steps),
        "--seed", str(args.seed),
        "--canonical-order", "--positional",
        "--log", str(work / "diffusion_loss.jsonl"),
    ])


if __name__ == "__main__":
    sys.exit(run())
