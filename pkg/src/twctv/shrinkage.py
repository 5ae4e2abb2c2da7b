"""Proximal operators: generalized soft thresholding, GTSVT and weighted l1.

Also holds the two adaptive weight rules: the sigmoid weights on
transform-domain singular values and the exponential weights on the
sparse component.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, as_tensor
from .transforms import _slices, _unslices, apply_transform, inverse_transform

__all__ = [
    "ConvergenceError",
    "gst_threshold",
    "gst",
    "gst_scalar",
    "SvWeightTensor",
    "compute_sv_weights",
    "gtsvt",
    "soft_threshold",
    "soft_threshold_weighted",
    "SparseWeightTensor",
    "sparse_weights",
]

FIXED_POINT_MAX_ITER = 100
FIXED_POINT_TOL = 1e-10


class ConvergenceError(ArithmeticError):
    """An inner iterative solve failed to reach its tolerance."""


def _check_p(p, allow_one=False):
    upper_ok = p <= 1 if allow_one else p < 1
    if not (p > 0 and upper_ok):
        interval = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"p must lie in {interval}, got {p}")


def _tau0(w, p):
    return (2.0 * w * (1.0 - p)) ** (1.0 / (2.0 - p))


def gst_threshold(w, p):
    """Threshold below which ``argmin_x w|x|^p + (x - y)^2 / 2`` is zero.

    ``delta = [2w(1-p)]^(1/(2-p)) + w p [2w(1-p)]^((p-1)/(2-p))``
    """
    _check_p(p)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weight must be positive")
    t = _tau0(w, p)
    delta = t + w * p * t ** (p - 1.0)
    return float(delta) if delta.ndim == 0 else delta


def _bisect(ay, w, p, lo, hi, iters=200):
    # f(x) = x - |y| + w p x^(p-1) is increasing on [tau0, |y|], f(lo) < 0 < f(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = mid - ay + w * p * mid ** (p - 1.0)
        neg = f < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.max(hi - lo, initial=0.0) <= FIXED_POINT_TOL:
            break
    return 0.5 * (lo + hi)


def gst(y, w, p):
    """Elementwise generalized soft thresholding.

    Solves ``min_x w|x|^p + (x - y)^2 / 2`` globally for every entry.
    ``p = 1`` falls back to ordinary soft thresholding; zero weights leave
    entries untouched.
    """
    _check_p(p, allow_one=True)
    y = np.asarray(y, dtype=float)
    w = np.broadcast_to(np.asarray(w, dtype=float), y.shape)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if p == 1:
        return np.sign(y) * np.maximum(np.abs(y) - w, 0.0)

    ay = np.abs(y)
    out = np.where(w == 0, y, 0.0)
    pos = w > 0
    t = np.zeros_like(ay)
    t[pos] = _tau0(w[pos], p)
    delta = np.full_like(ay, np.inf)
    delta[pos] = t[pos] + w[pos] * p * t[pos] ** (p - 1.0)
    active = pos & (ay > delta)
    if not active.any():
        return out

    a, wa = ay[active], w[active]
    tol = FIXED_POINT_TOL * np.maximum(1.0, a)
    x = a.copy()
    for _ in range(FIXED_POINT_MAX_ITER):
        x_new = a - wa * p * x ** (p - 1.0)
        step = np.abs(x_new - x)
        x = x_new
        if np.all(step <= tol):
            break
    else:
        x = _bisect(a, wa, p, t[active], a)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        bad = int(np.count_nonzero(~np.isfinite(x) | (x <= 0)))
        raise ConvergenceError(f"GST root solve failed for {bad} of {x.size} entries (p={p})")
    out[active] = np.sign(y[active]) * x
    return out


def gst_scalar(y, w, p):
    """Scalar GST: the global minimizer of ``w|x|^p + (x - y)^2 / 2``."""
    _check_p(p)
    if w <= 0:
        raise ValueError("weight must be positive")
    return float(gst(np.float64(y), w, p))


@dataclass(frozen=True)
class SvWeightTensor:
    """Diagonal of an f-diagonal weight tensor in singular-value layout.

    ``values[..., i]`` weights the ``i``-th largest singular value of each
    transform-domain slice.
    """

    values: np.ndarray
    m: float

    def as_tensor(self, n1, n2):
        """Expand to the full f-diagonal tensor of shape ``(n1, n2, *trailing)``."""
        k = self.values.shape[-1]
        full = np.zeros((*self.values.shape[:-1], n1, n2))
        full[..., np.arange(k), np.arange(k)] = self.values
        return _unslices(full)


def compute_sv_weights(singular_values, m=10.0):
    """Sigmoid weights from per-slice non-increasing singular values.

    Singular values are scaled to ``sigma * m / max(sigma)`` per slice and
    the weight of position ``i`` is the sigmoid of the scaled value at the
    mirrored position ``n_min - 1 - i``. The largest singular value thus
    gets the smallest weight. All-zero slices get a uniform 0.5.
    """
    if m <= 0:
        raise ValueError("sigmoid scale must be positive")
    sigma = np.asarray(singular_values, dtype=float)
    smax = sigma.max(axis=-1, keepdims=True)
    scaled = np.divide(sigma * m, smax, out=np.zeros_like(sigma), where=smax > 0)
    return SvWeightTensor(1.0 / (1.0 + np.exp(-scaled[..., ::-1])), float(m))


def gtsvt(X, tau, p, spec, sigmoid_m=10.0, weights=None):
    """Generalized tensor singular value thresholding.

    Shrinks every transform-domain singular value with GST at weight
    ``tau * W``. ``weights=None`` recomputes the sigmoid weights from the
    singular values of ``X``; a scalar or an array in singular-value layout
    fixes them instead (``weights=1, p=1`` is plain tensor SVT).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    _check_p(p, allow_one=True)
    X = as_tensor(X)
    Xh = apply_transform(X, spec)
    U, s, Vh = np.linalg.svd(_slices(Xh), full_matrices=False)
    if weights is None:
        W = compute_sv_weights(s, sigmoid_m).values
    else:
        W = np.asarray(weights, dtype=float)
        if W.ndim and W.shape != s.shape:
            raise ShapeError(f"weights of shape {W.shape} do not match singular values {s.shape}")
    s_new = gst(s, tau * W, p)
    C = (U * s_new[..., None, :]) @ Vh
    return inverse_transform(_unslices(C), spec)


def soft_threshold(X, tau):
    return np.sign(X) * np.maximum(np.abs(X) - tau, 0.0)


def soft_threshold_weighted(X, thresholds):
    """Entrywise ``sign(x) max(|x| - t, 0)`` with a threshold per entry."""
    X = np.asarray(X, dtype=float)
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.ndim and thresholds.shape != X.shape:
        raise ShapeError(f"threshold shape {thresholds.shape} does not match {X.shape}")
    if np.any(thresholds < 0):
        raise ValueError("thresholds must be nonnegative")
    return soft_threshold(X, thresholds)


@dataclass(frozen=True)
class SparseWeightTensor:
    values: np.ndarray
    eta: float
    c_E: float


def sparse_weights(E, c_E=2.0, mask=None):
    """Exponential weights ``exp(-|E| / eta)`` with ``eta = c_E * mean|E|``.

    The mean runs over all entries, or over ``mask`` when given. A zero
    ``eta`` (``E`` vanishes) yields unit weights, i.e. plain l1.
    """
    if c_E <= 0:
        raise ValueError("c_E must be positive")
    A = np.abs(np.asarray(E, dtype=float))
    sample = A if mask is None else A[np.asarray(mask, dtype=bool)]
    eta = float(c_E * sample.mean()) if sample.size else 0.0
    if eta == 0.0:
        return SparseWeightTensor(np.ones_like(A), 0.0, float(c_E))
    return SparseWeightTensor(np.exp(-A / eta), eta, float(c_E))
