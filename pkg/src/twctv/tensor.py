"""Dense tensor helpers: mode-k products, observation projection, norms.

Tensors are plain :class:`numpy.ndarray` objects of order ``d >= 3``.
Modes are addressed by zero-based numpy ``axis`` numbers throughout the
Python API, so mode ``k`` of the usual one-based notation is ``axis=k-1``.
The command line interface is the only place where one-based mode numbers
are accepted (see :mod:`twctv.cli`).
"""

import numpy as np

__all__ = [
    "ShapeError",
    "as_tensor",
    "mode_k_product",
    "project",
    "frobenius_norm",
    "l1_norm",
    "linf_norm",
    "frontal_slice_index",
    "frontal_slices",
    "from_frontal_slices",
    "real_part",
]


class ShapeError(ValueError):
    """Raised when tensor, matrix or mask extents are incompatible."""


def as_tensor(X, min_order=3):
    """Return ``X`` as a float64 array of at least ``min_order`` modes."""
    X = np.asarray(X)
    if not np.iscomplexobj(X):
        X = X.astype(np.float64, copy=False)
    if X.ndim < min_order:
        raise ShapeError(f"expected a tensor of order >= {min_order}, got shape {X.shape}")
    return X


def mode_k_product(X, U, axis):
    """Mode-k product ``X x_k U``.

    Contracts mode ``axis`` of ``X`` against the columns of ``U``, i.e.
    ``Y[..., i, ...] = sum_l X[..., l, ...] * U[i, l]``.

    Parameters
    ----------
    X : ndarray
        Input tensor, real or complex.
    U : ndarray
        Square matrix with side ``X.shape[axis]``.
    axis : int
        Zero-based mode index.

    Returns
    -------
    ndarray
        Tensor with the same shape as ``X``.
    """
    X = np.asarray(X)
    U = np.asarray(U)
    if not -X.ndim <= axis < X.ndim:
        raise ShapeError(f"axis {axis} out of range for order-{X.ndim} tensor")
    n = X.shape[axis]
    if U.ndim != 2 or U.shape != (n, n):
        raise ShapeError(f"matrix of shape {U.shape} cannot act on mode of extent {n}")
    Y = np.tensordot(U, X, axes=([1], [axis]))
    return np.moveaxis(Y, 0, axis)


def project(X, mask):
    """Orthogonal projection onto the observed entries.

    Observed entries (``mask`` true) are copied, the rest are zero.
    """
    X = np.asarray(X)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != X.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match tensor shape {X.shape}")
    return np.where(mask, X, 0.0)


def frobenius_norm(X):
    return float(np.linalg.norm(np.ravel(X)))


def l1_norm(X):
    return float(np.sum(np.abs(X)))


def linf_norm(X):
    X = np.asarray(X)
    if X.size == 0:
        return 0.0
    return float(np.max(np.abs(X)))


def frontal_slice_index(index, shape):
    """Flatten a trailing multi-index to a frontal-slice number.

    ``index`` holds zero-based indices ``(i_3, ..., i_d)`` for the modes
    after the first two. The mapping is column-major, so ``i_3`` varies
    fastest: ``j = i_3 + n_3 * (i_4 + n_4 * (i_5 + ...))``.
    """
    trailing = tuple(shape[2:])
    if len(index) != len(trailing):
        raise ShapeError("index length must equal the number of trailing modes")
    return int(np.ravel_multi_index(tuple(index), trailing, order="F"))


def frontal_slices(X):
    """Stack of frontal slices with shape ``(N, n1, n2)``.

    Slice ``j`` follows :func:`frontal_slice_index`.
    """
    X = np.asarray(X)
    n1, n2 = X.shape[:2]
    flat = X.reshape(n1, n2, -1, order="F")
    return np.moveaxis(flat, 2, 0)


def from_frontal_slices(slices, shape):
    """Inverse of :func:`frontal_slices`."""
    slices = np.asarray(slices)
    flat = np.moveaxis(slices, 0, 2)
    return flat.reshape(shape, order="F")


def real_part(X, rtol=1e-9):
    """Drop a negligible imaginary part.

    Raises :class:`ValueError` when the imaginary part exceeds ``rtol``
    relative to the magnitude of ``X``; silent truncation there would hide
    a broken conjugate symmetry.
    """
    X = np.asarray(X)
    if not np.iscomplexobj(X):
        return X
    imag = np.linalg.norm(X.imag.ravel())
    scale = np.linalg.norm(X.ravel())
    if imag > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError(f"imaginary residue {imag:.3e} exceeds {rtol:g} relative to {scale:.3e}")
    return np.ascontiguousarray(X.real)
