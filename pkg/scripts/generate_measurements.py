#!/usr/bin/env python3
"""Generate a synthetic measurement CSV from the built-in reference model.

Each GOP's curve is drawn from one cluster's centroid fit (round-robin
over clusters) with optional uniform noise and off-grid sample bitrates,
which makes the output a realistic input for ``rdladder train`` and
``rdladder recommend`` demos.

Usage:
    python3 scripts/generate_measurements.py --gops 60 --noise 0.1 > train.csv
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import rdladder as rl  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--gops", type=int, default=60, help="number of GOPs (default 60)")
    parser.add_argument("--noise", type=float, default=0.1,
                        help="uniform PSNR noise amplitude in dB (default 0.1)")
    parser.add_argument("--samples", type=int, default=10,
                        help="measurements per GOP and tier (default 10)")
    parser.add_argument("--off-grid", action="store_true",
                        help="sample at jittered bitrates instead of the default grid")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tiers", default="360p,540p,720p,1080p")
    args = parser.parse_args()

    model_set = rl.builtin_model()
    tiers = [rl.tier_from_name(name) for name in args.tiers.split(",")]
    rng = np.random.default_rng(args.seed)
    lo, hi = model_set.grid.span

    print("gop_id,resolution,bitrate_mbps,psnr_db")
    for index in range(args.gops):
        cluster = index % model_set.k + 1
        if args.off_grid:
            interior = np.sort(rng.uniform(lo, hi, size=max(args.samples - 2, 0)))
            bitrates = np.concatenate([[lo], interior, [hi]])
        else:
            bitrates = np.linspace(lo, hi, args.samples)
        for tier in tiers:
            curve = model_set.model(cluster, tier)
            for b in bitrates:
                q = rl.eval_cubic(curve, float(b)) + rng.uniform(-args.noise, args.noise)
                print(f"gop{index:03d},{tier.name},{b:.6f},{q:.6f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
