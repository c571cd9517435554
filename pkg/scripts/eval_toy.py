#!/usr/bin/env python3
"""Metric report for a trained toy model across condition settings.

Runs the evaluation harness once per condition mode (unconditional, each
single condition, and all four) and prints a compact table.

Usage: python3 scripts/eval_toy.py [--workdir runs/toy] [--count 256]
"""
import argparse
import json
import pathlib
import sys

from layoutdiff.cli import main

MODES = (
    "unconditional",
    "prompt",
    "class_count",
    "given_design",
    "guidelines",
    "all",
)


def run() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="runs/toy")
    ap.add_argument("--count", type=int, default=256)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--preset", default="single:2.5")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    work = pathlib.Path(args.workdir)
    reports = {}
    for mode in MODES:
        out = work / f"eval_{mode}.json"
        code = main([
            "eval", "--schema", "toy",
            "--checkpoint", str(work / "diffusion.pt"),
            "--corpus", str(work / "corpus" / "eval"),
            "--conditions-mode", mode,
            "--count", str(args.count),
            "--steps", str(args.steps),
            "--preset", args.preset,
            "--seed", str(args.seed),
            "--out", str(out),
        ])
        if code:
            return code
        reports[mode] = json.loads(out.read_text())

    metric_names = sorted({m for r in reports.values() for m in r["metrics"]})
    print("\t".join(["mode"] + metric_names))
    for mode, report in reports.items():
        row = [mode]
        for name in metric_names:
            value = report["metrics"].get(name)
            row.append("-" if value is None else f"{value:.4f}")
        print("\t".join(row))
    return 0


if __name__ == "__main__":
    sys.exit(run())
