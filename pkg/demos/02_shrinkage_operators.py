"""
Nonconvex shrinkage
===================

Soft thresholding is the proximal map of the absolute value. Replacing
``|x|`` by ``|x|^p`` with ``p < 1`` gives generalized soft thresholding
(GST): values below a threshold are killed, larger values are shrunk much
less than by soft thresholding. Applied to transform-domain singular values
with sigmoid weights, it becomes the GTSVT step of the solver.
"""

import numpy as np

from twctv import build_transform, compute_sv_weights, gst, gst_threshold, gtsvt, m_product
from twctv.transforms import transform_singular_values

y = np.linspace(0, 4, 9)
w = 1.0
print("   y    soft   p=0.9   p=0.5   p=0.2")
for yi, a, b, c, d in zip(y, gst(y, w, 1.0), gst(y, w, 0.9), gst(y, w, 0.5), gst(y, w, 0.2)):
    print(f"{yi:5.2f}  {a:6.3f}  {b:6.3f}  {c:6.3f}  {d:6.3f}")

for p in (0.9, 0.5, 0.2):
    print(f"threshold for w = 1, p = {p}: {gst_threshold(1.0, p):.4f}")

# sigmoid weights: dominant singular values get roughly half the penalty of
# the tail
sigma = np.array([5.0, 2.0, 0.5, 0.1, 0.0])
print("weights:", np.round(compute_sv_weights(sigma, m=10).values, 4))

# GTSVT on a noisy low-rank tensor: tail singular values vanish
rng = np.random.default_rng(1)
shape = (20, 20, 8)
spec = build_transform("dct", shape)
A = rng.standard_normal((20, 2, 8))
B = rng.standard_normal((2, 20, 8))
X = m_product(A, B, spec) + 0.05 * rng.standard_normal(shape)
before = transform_singular_values(X, spec)[0]
after = transform_singular_values(gtsvt(X, 0.5, 0.5, spec), spec)[0]
print("first slice before:", np.round(before[:5], 3))
print("first slice after: ", np.round(after[:5], 3))
