#!/usr/bin/env python3
"""Generate the synthetic toy corpus with a train/eval split.

Usage: python3 scripts/make_toy_corpus.py [--out runs/corpus] [--count 5000]
"""
import argparse
import sys

from layoutdiff.cli import main


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/corpus")
    ap.add_argument("--count", type=int, default=5000)
    ap.add_argument("--eval-fraction", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    return main([
        "make-corpus",
        "--schema", "toy",
        "--out", args.out,
        "--count", str(args.count),
        "--eval-fraction", str(args.eval_fraction),
        "--seed", str(args.seed),
    ])


if __name__ == "__main__":
    sys.exit(run())
