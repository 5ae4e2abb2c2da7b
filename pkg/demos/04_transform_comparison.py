"""
Which transform?
================

The same completion problem is posed for each transform family, with the
ground truth generated under the family being tested. Orthogonal families
(DCT, Haar, random orthogonal) see statistically equivalent problems; the
unnormalized DFT works on complex slices and is slower.
"""

import argparse

from twctv import SolverConfig
from twctv.experiments import transform_comparison

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true", help="30 x 30 x 20 x 20 instead of 16 x 16 x 8 x 8")
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

shape = (30, 30, 20, 20) if args.full else (16, 16, 8, 8)
config = SolverConfig(p=0.4, axes=(0, 1))
rows = transform_comparison(shape=shape, rank=3, sampling_rate=0.5, seed=args.seed, config=config)

print(f"{'family':8s} {'RE':>10s} {'seconds':>8s} {'iters':>6s}")
for family, (re, seconds, result) in rows.items():
    print(f"{family.value:8s} {re:10.2e} {seconds:8.1f} {result.iterations:6d}")
