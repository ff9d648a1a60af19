#!/usr/bin/env python3
"""Capacity and storage report for both pooling presets.

Prints the per-layer summary table, total parameter counts, and the exact
checkpoint byte size for the six-pool and paper-figure presets, optionally
alongside user-supplied baseline parameter counts for comparison.
"""

import argparse

from mpoxsldnet.checkpoint import checkpoint_byte_size
from mpoxsldnet.config import RunConfig
from mpoxsldnet.model import ModelConfig, build_mpoxsldnet, count_parameters, summary_text
from mpoxsldnet.training import model_tensors


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--compare", action="append", default=[],
                        metavar="NAME=PARAMS",
                        help="baseline rows for the comparison table")
    parser.add_argument("--image-size", type=int, default=224)
    args = parser.parse_args()

    totals = {}
    for preset in ("six-pool", "paper-figure"):
        cfg = ModelConfig(preset=preset, image_size=args.image_size)
        model = build_mpoxsldnet(cfg, seed=0)
        tensors = model_tensors(model)
        size = checkpoint_byte_size({k: v.shape for k, v in tensors.items()},
                                    RunConfig(model=cfg).to_dict())
        print(f"== preset {preset}")
        print(summary_text(model, checkpoint_bytes=size))
        print()
        totals[preset] = count_parameters(model).total

    print(f"{'model':<28} {'parameters':>14}")
    for preset, total in totals.items():
        print(f"{preset:<28} {total:>14,}")
    for item in args.compare:
        name, _, count = item.partition("=")
        print(f"{name:<28} {int(count):>14,}")


if __name__ == "__main__":
    main()
