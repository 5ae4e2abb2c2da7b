"""
Phase transition
================

For each tubal rank and sampling rate a few random problems are solved and a
recovery counts as a success when the relative error is below 1e-3. The
weighted nonconvex model (``p = 0.4``) is compared with the plain convex
one (uniform weights, ``p = 1``). Gradients run along the two spatial modes
only, since a difference along the transformed mode is not low rank. The
default grid is small; ``--desk`` runs the full 8 x 9 desk grid on
20 x 20 x 10 tensors (about five minutes).
"""

import argparse
from dataclasses import replace

from twctv import SolverConfig
from twctv.experiments import PhaseGrid, desk_phase_grid, phase_transition

parser = argparse.ArgumentParser()
parser.add_argument("--desk", action="store_true")
args = parser.parse_args()

weighted = SolverConfig(mode="completion", p=0.4, axes=(0, 1))
plain = replace(weighted, p=1.0, sv_weights="uniform")

if args.desk:
    grids = desk_phase_grid(), desk_phase_grid()
else:
    grids = [PhaseGrid(ranks=(1, 3, 5), rates=(0.3, 0.5, 0.7), trials=2) for _ in range(2)]

a = phase_transition(grids[0], weighted)
b = phase_transition(grids[1], plain)
print("weighted, p = 0.4")
print(a.to_csv())
print("unweighted, p = 1")
print(b.to_csv())
print(f"total successes: weighted {a.total}, unweighted {b.total}")
