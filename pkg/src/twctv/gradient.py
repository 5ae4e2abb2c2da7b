"""Cyclic finite differences and the Fourier-domain solve of the X-update.

The difference matrix ``D_n`` is the row circulant of ``(-1, 1, 0, ..., 0)``,
so ``grad(X, k)[i] = X[i+1] - X[i]`` with wrap-around along axis ``k``.
Every circulant is diagonalized by the DFT, which makes
``(I + sum_k grad_k^T grad_k) X = R`` solvable by one FFT pair.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .tensor import ShapeError

__all__ = [
    "difference_matrix",
    "grad",
    "grad_adjoint",
    "difference_spectrum",
    "SpectrumCache",
    "build_spectrum_cache",
    "solve_x_subproblem",
    "normal_operator",
]


def _check_axis(X, axis):
    if axis not in (0, 1, 2) or axis >= X.ndim:
        raise ValueError(f"difference axis must be 0, 1 or 2 (and < order), got {axis}")


def difference_matrix(n):
    """Dense ``D_n``: -1 on the diagonal, +1 on the cyclic successor."""
    D = -np.eye(n) + np.roll(np.eye(n), 1, axis=1)
    return D


def grad(X, axis):
    """Forward cyclic difference along ``axis`` (``X x_k D_n``)."""
    X = np.asarray(X)
    _check_axis(X, axis)
    return np.roll(X, -1, axis=axis) - X


def grad_adjoint(Y, axis):
    """Adjoint of :func:`grad`: ``Y x_k D_n^T``, a backward difference."""
    Y = np.asarray(Y)
    _check_axis(Y, axis)
    return np.roll(Y, 1, axis=axis) - Y


def difference_spectrum(n):
    """``|F(D_n)|^2 = 2 - 2 cos(2 pi j / n)`` for ``j = 0..n-1``."""
    j = np.arange(n)
    return 2.0 - 2.0 * np.cos(2.0 * np.pi * j / n)


@dataclass(frozen=True)
class SpectrumCache:
    """Denominator ``1 + sum_k |F(D_k)|^2`` on the real-FFT grid of ``shape``.

    The operator only acts along the difference axes, so the transform runs
    over ``fft_axes`` (the sorted difference axes) and the denominator has
    extent 1 along every other axis.
    """

    shape: tuple
    axes: tuple
    denominator: np.ndarray

    @property
    def fft_axes(self):
        return tuple(sorted(self.axes))

    def matches(self, shape, axes):
        return tuple(shape) == self.shape and tuple(axes) == self.axes


def build_spectrum_cache(shape, axes):
    shape = tuple(int(n) for n in shape)
    axes = tuple(axes)
    for k in axes:
        if k >= len(shape):
            raise ValueError(f"axis {k} out of range for shape {shape}")
    fft_axes = sorted(axes)
    grid = [1] * len(shape)
    for k in fft_axes:
        grid[k] = shape[k]
    if fft_axes:
        # rfftn halves the last transformed axis
        grid[fft_axes[-1]] = shape[fft_axes[-1]] // 2 + 1
    denom = np.ones(grid)
    for k in axes:
        lam = difference_spectrum(shape[k])[: grid[k]]
        view = [1] * len(shape)
        view[k] = grid[k]
        denom = denom + lam.reshape(view)
    denom.setflags(write=False)
    return SpectrumCache(shape, axes, denom)


def normal_operator(X, axes):
    """Apply ``I + sum_k grad_k^T grad_k`` directly (used for residual checks)."""
    out = np.array(X, dtype=float, copy=True)
    for k in axes:
        out += grad_adjoint(grad(X, k), k)
    return out


def solve_x_subproblem(rhs_data, grad_targets, cache, workers=None):
    """Closed-form minimizer of ``sum_k ||grad_k X - T_k||^2 + ||X - R||^2``.

    Parameters
    ----------
    rhs_data : ndarray
        Data term ``R``.
    grad_targets : mapping or sequence
        One target ``T_k`` per axis in ``cache.axes`` (mapping keyed by axis,
        or a sequence in the same order).
    cache : SpectrumCache
        Precomputed denominator for this shape and axis set.

    Returns
    -------
    ndarray
        Real solution of ``(I + sum grad_k^T grad_k) X = R + sum grad_k^T T_k``.
    """
    rhs_data = np.asarray(rhs_data, dtype=float)
    if tuple(rhs_data.shape) != cache.shape:
        raise ShapeError(f"right-hand side shape {rhs_data.shape} does not match cache {cache.shape}")
    if isinstance(grad_targets, dict):
        grad_targets = [grad_targets[k] for k in cache.axes]
    if len(grad_targets) != len(cache.axes):
        raise ValueError("need exactly one gradient target per axis")
    total = rhs_data.copy()
    for k, T in zip(cache.axes, grad_targets):
        total += grad_adjoint(T, k)
    if not cache.axes:
        return total
    fft_axes = cache.fft_axes
    spec = scipy.fft.rfftn(total, axes=fft_axes, workers=workers)
    spec /= cache.denominator
    return scipy.fft.irfftn(spec, s=[cache.shape[k] for k in fft_axes], axes=fft_axes, workers=workers)
