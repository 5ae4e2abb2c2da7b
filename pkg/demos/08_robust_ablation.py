"""
Weighted versus plain l1
========================

Robust completion from 8% of the entries with 2% of the observations hit by
outliers of magnitude 0.4. The sparse term uses either adaptive exponential
weights or the plain l1 norm; everything else is identical.
"""

import argparse

from twctv import SolverConfig
from twctv.experiments import ablation

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true", help="80 x 80 x 20, rank 5")
args = parser.parse_args()

shape, rank = ((80, 80, 20), 5) if args.full else ((40, 40, 10), 2)
rows = ablation(shape=shape, rank=rank, sampling_rate=0.08, corruption=0.02, p=0.9, config=SolverConfig(mode="rlrtc"))
print(f"{'seed':>4s} {'weighted':>12s} {'plain':>12s}")
for row in rows:
    print(f"{row['seed']:4d} {row['weighted_residual']:12.3e} {row['plain_residual']:12.3e}")
