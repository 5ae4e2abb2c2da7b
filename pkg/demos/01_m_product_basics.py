"""
Tensors as stacks of matrices
=============================

The M-product treats an ``n1 x n2 x n3 x ...`` array as a collection of
``n1 x n2`` frontal slices. An invertible transform mixes the trailing modes,
slices are multiplied pairwise in the transformed domain, and the result is
mapped back. With the DFT this is the familiar t-product; here we mostly use
the orthonormal DCT.
"""

import numpy as np

from twctv import build_transform, m_product, m_svd, m_transpose, tubal_rank
from twctv.experiments import SyntheticSpec, gen_synthetic

rng = np.random.default_rng(0)

# a fourth-order tensor: 12 x 10 slices indexed by a 6 x 4 grid
shape = (12, 10, 6, 4)
X = rng.standard_normal(shape)

for family in ("dct", "dft", "haar", "rot"):
    spec = build_transform(family, shape, seed=1)
    print(f"{family:5s} c = {spec.c:6.1f}  complex = {spec.is_complex}")

spec = build_transform("dct", shape)

# the M-SVD factors X into two orthogonal tensors and an f-diagonal core
f = m_svd(X, spec)
rebuilt = m_product(m_product(f.U, f.S, spec), m_transpose(f.V, spec), spec)
print("M-SVD reconstruction error:", np.linalg.norm(rebuilt - X) / np.linalg.norm(X))
print("tubal rank of a random tensor:", f.tubal_rank)

# products of thin factors have small tubal rank, which is what the
# completion solver exploits
L = gen_synthetic(SyntheticSpec(shape, rank=2, transform="dct", seed=3))
print("tubal rank of M1 *_M M2 with r = 2:", tubal_rank(L, spec))

# the largest singular values of each transformed slice
print("leading singular values, first slice:", np.round(m_svd(L, spec).singular_values[0, 0, :4], 4))
