"""Invertible trailing-mode transforms and the M-product algebra built on them.

A :class:`TransformSpec` fixes one invertible matrix ``M_k`` per trailing
mode (axes ``2..d-1``) with ``M_k M_k^H = alpha_k I``. The forward transform
``L(X) = X x_3 M_3 x_4 ... x_d M_d`` moves a tensor to the transform domain,
where the M-product, M-SVD and weighted Schatten-p norm act slice by slice.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .gradient import grad
from .tensor import ShapeError, as_tensor, mode_k_product, real_part

__all__ = [
    "Family",
    "TransformSpec",
    "MSvdFactors",
    "build_transform",
    "haar_matrix",
    "apply_transform",
    "inverse_transform",
    "m_product",
    "m_transpose",
    "m_identity",
    "m_svd",
    "tubal_rank",
    "transform_singular_values",
    "weighted_schatten_p_norm",
    "tv_norm",
    "twctv_norm",
]

TUBAL_RANK_RTOL = 1e-9


class Family(str, enum.Enum):
    DCT = "dct"
    DFT = "dft"
    HAAR = "haar"
    RANDOM_ORTHOGONAL = "rot"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"dwt": "haar", "random_orthogonal": "rot", "fft": "dft"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class TransformSpec:
    """Per-mode transform matrices for the trailing modes of a fixed shape.

    ``matrices[j]`` acts on axis ``j + 2``. ``c`` is the product of the
    ``alphas`` and relates norms across domains: ``||L(X)||_F = sqrt(c) ||X||_F``.
    """

    family: Family
    shape: tuple
    matrices: tuple = field(repr=False)
    alphas: tuple
    seed: int = 0

    @property
    def c(self):
        return float(math.prod(self.alphas))

    @property
    def trailing_shape(self):
        return tuple(self.shape[2:])

    @property
    def is_complex(self):
        return self.family is Family.DFT

    def check(self, X):
        if tuple(X.shape[2:]) != self.trailing_shape:
            raise ShapeError(
                f"tensor trailing extents {tuple(X.shape[2:])} do not match transform {self.trailing_shape}"
            )


def haar_matrix(n):
    """Orthonormal multilevel Haar analysis matrix of size ``n``.

    Each level splits the current approximation band into pairwise
    averages and differences; levels continue while the band length is
    even, so powers of two give the full dyadic transform and e.g. ``n=20``
    gets two levels (20 -> 10 -> 5).
    """
    if n < 1:
        raise ValueError("extent must be positive")
    if n > 1 and n % 2:
        raise ValueError(f"Haar transform needs an even extent, got {n}")
    H = np.eye(n)
    length = n
    while length > 1 and length % 2 == 0:
        half = length // 2
        step = np.zeros((length, length))
        idx = np.arange(half)
        step[idx, 2 * idx] = step[idx, 2 * idx + 1] = 1 / math.sqrt(2)
        step[half + idx, 2 * idx] = 1 / math.sqrt(2)
        step[half + idx, 2 * idx + 1] = -1 / math.sqrt(2)
        level = np.eye(n)
        level[:length, :length] = step
        H = level @ H
        length = half
    return H


def _random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def build_transform(family, shape, seed=0):
    """Build the transform for tensors of the given shape.

    DCT is the orthonormal DCT-II, DFT the unnormalized Fourier matrix
    (``alpha_k = n_k``), HAAR the multilevel orthonormal Haar matrix and
    RANDOM_ORTHOGONAL a Haar-distributed orthogonal matrix drawn from
    ``seed``.
    """
    family = Family.parse(family)
    shape = tuple(int(n) for n in shape)
    if len(shape) < 3:
        raise ShapeError(f"transforms need order >= 3, got shape {shape}")
    rng = np.random.default_rng(seed)
    matrices, alphas = [], []
    for n in shape[2:]:
        if family is Family.DCT:
            M = scipy.fft.dct(np.eye(n), type=2, norm="ortho", axis=0)
            alpha = 1.0
        elif family is Family.DFT:
            M = scipy.fft.fft(np.eye(n), axis=0)
            alpha = float(n)
        elif family is Family.HAAR:
            try:
                M = haar_matrix(n)
            except ValueError as exc:
                raise ValueError(f"HAAR transform: {exc}") from None
            alpha = 1.0
        else:
            M = _random_orthogonal(n, rng)
            alpha = 1.0
        M.setflags(write=False)
        matrices.append(M)
        alphas.append(alpha)
    return TransformSpec(family, shape, tuple(matrices), tuple(alphas), int(seed))


def apply_transform(X, spec):
    """Forward transform ``L(X)``; complex for the DFT family."""
    X = as_tensor(X)
    spec.check(X)
    axes = tuple(range(2, X.ndim))
    if spec.family is Family.DCT:
        if np.iscomplexobj(X):
            return scipy.fft.dctn(X.real, type=2, norm="ortho", axes=axes) + 1j * scipy.fft.dctn(
                X.imag, type=2, norm="ortho", axes=axes
            )
        return scipy.fft.dctn(X, type=2, norm="ortho", axes=axes)
    if spec.family is Family.DFT:
        return scipy.fft.fftn(X, axes=axes)
    for ax, M in zip(axes, spec.matrices):
        X = mode_k_product(X, M, ax)
    return X


def inverse_transform(Xh, spec, real=True):
    """Inverse transform ``L^{-1}``.

    With ``real=True`` the result must be real up to a 1e-9 relative
    imaginary residue, which is then discarded.
    """
    Xh = as_tensor(Xh)
    spec.check(Xh)
    axes = tuple(range(2, Xh.ndim))
    if spec.family is Family.DCT:
        if np.iscomplexobj(Xh):
            X = scipy.fft.idctn(Xh.real, type=2, norm="ortho", axes=axes) + 1j * scipy.fft.idctn(
                Xh.imag, type=2, norm="ortho", axes=axes
            )
        else:
            X = scipy.fft.idctn(Xh, type=2, norm="ortho", axes=axes)
    elif spec.family is Family.DFT:
        X = scipy.fft.ifftn(Xh, axes=axes)
    else:
        X = Xh
        for ax, M, alpha in zip(axes, spec.matrices, spec.alphas):
            X = mode_k_product(X, M.conj().T / alpha, ax)
    return real_part(X) if real else X


def _slices(Xh):
    # (n1, n2, *T) -> (*T, n1, n2) view
    return np.moveaxis(Xh, (0, 1), (-2, -1))


def _unslices(S):
    return np.moveaxis(S, (-2, -1), (0, 1))


def m_product(X, Y, spec):
    """M-product ``X *_M Y``: facewise products in the transform domain."""
    X, Y = as_tensor(X), as_tensor(Y)
    if X.shape[1] != Y.shape[0] or X.shape[2:] != Y.shape[2:]:
        raise ShapeError(f"cannot M-multiply shapes {X.shape} and {Y.shape}")
    Zh = _unslices(_slices(apply_transform(X, spec)) @ _slices(apply_transform(Y, spec)))
    real = not (np.iscomplexobj(X) or np.iscomplexobj(Y))
    return inverse_transform(Zh, spec, real=real)


def m_transpose(X, spec):
    """Tensor transpose compatible with the M-product.

    Each transform-domain slice is replaced by its conjugate transpose,
    so ``(A *_M B)^T = B^T *_M A^T``.
    """
    Xh = apply_transform(X, spec)
    Th = _unslices(np.conj(np.swapaxes(_slices(Xh), -1, -2)))
    return inverse_transform(Th, spec, real=not np.iscomplexobj(X))


def m_identity(n, spec):
    """M-identity of size ``n x n x trailing``: identity in every transform slice."""
    Ih = np.broadcast_to(np.eye(n).reshape(n, n, *([1] * len(spec.trailing_shape))), (n, n, *spec.trailing_shape))
    return inverse_transform(np.array(Ih, dtype=complex if spec.is_complex else float), spec)


@dataclass(frozen=True)
class MSvdFactors:
    """``X = U *_M S *_M V^T`` with f-diagonal ``S``.

    ``singular_values`` holds the transform-domain singular values with
    shape ``(*trailing, min(n1, n2))``, non-increasing along the last axis.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    tubal_rank: int
    singular_values: np.ndarray


def _conjugate_partners(trailing):
    # flat C-order index of the slice holding the complex conjugate spectrum
    grids = np.indices(trailing).reshape(len(trailing), -1)
    mirror = (-grids) % np.asarray(trailing).reshape(-1, 1)
    return np.ravel_multi_index(tuple(mirror), trailing)


def _symmetric_svd(slices, trailing):
    """Full SVD of DFT-domain slices with conjugate-symmetric factors."""
    n_slices = slices.shape[0]
    partner = _conjugate_partners(trailing)
    n1, n2 = slices.shape[1:]
    U = np.empty((n_slices, n1, n1), dtype=complex)
    s = np.empty((n_slices, min(n1, n2)))
    Vh = np.empty((n_slices, n2, n2), dtype=complex)
    own = partner == np.arange(n_slices)
    if own.any():
        Ur, sr, Vr = np.linalg.svd(slices[own].real)
        U[own], s[own], Vh[own] = Ur, sr, Vr
    lead = partner > np.arange(n_slices)
    if lead.any():
        Uc, sc, Vc = np.linalg.svd(slices[lead])
        U[lead], s[lead], Vh[lead] = Uc, sc, Vc
        follow = partner[lead]
        U[follow], s[follow], Vh[follow] = Uc.conj(), sc, Vc.conj()
    return U, s, Vh


def _rank_from_sigma(sigma, rtol=TUBAL_RANK_RTOL):
    smax = float(np.max(sigma)) if sigma.size else 0.0
    if smax == 0.0:
        return 0
    tube_max = sigma.reshape(-1, sigma.shape[-1]).max(axis=0)
    return int(np.count_nonzero(tube_max > rtol * smax))


def m_svd(X, spec):
    """Full M-SVD computed by one SVD per transform-domain frontal slice."""
    X = as_tensor(X)
    trailing = spec.trailing_shape
    n1, n2 = X.shape[:2]
    Xs = _slices(apply_transform(X, spec)).reshape(-1, n1, n2)
    if spec.is_complex:
        Uh, s, Vhh = _symmetric_svd(Xs, trailing)
    else:
        Uh, s, Vhh = np.linalg.svd(Xs)
    k = min(n1, n2)
    Sh = np.zeros((Xs.shape[0], n1, n2))
    Sh[:, np.arange(k), np.arange(k)] = s
    Vh = np.conj(np.swapaxes(Vhh, -1, -2))

    def back(A):
        return inverse_transform(_unslices(A.reshape(*trailing, *A.shape[1:])), spec)

    sigma = s.reshape(*trailing, k)
    return MSvdFactors(back(Uh), back(Sh), back(Vh), _rank_from_sigma(sigma), sigma)


def transform_singular_values(X, spec):
    """Singular values of every transform-domain slice, shape ``(*trailing, min(n1, n2))``."""
    X = as_tensor(X)
    return np.linalg.svd(_slices(apply_transform(X, spec)), compute_uv=False)


def tubal_rank(X, spec, rtol=TUBAL_RANK_RTOL):
    """Number of tubes of ``S`` whose largest entry exceeds ``rtol * sigma_max``."""
    return _rank_from_sigma(transform_singular_values(X, spec), rtol)


def _diag_weights(W, X):
    """Weights in the ``(*trailing, n_min)`` layout of the singular values."""
    W = np.asarray(W, dtype=float)
    n_min = min(X.shape[:2])
    if W.ndim == 0:
        return W
    if W.shape == X.shape:
        return np.diagonal(W, axis1=0, axis2=1)[..., :n_min]
    if W.shape == (*X.shape[2:], n_min):
        return W
    raise ShapeError(f"weights of shape {W.shape} do not fit tensor of shape {X.shape}")


def weighted_schatten_p_norm(X, W, p, spec):
    """Weighted Schatten-p (quasi-)norm ``((1/sqrt c) sum W sigma^p)^(1/p)``.

    ``W`` is a scalar, an f-diagonal tensor of ``X``'s shape, or its
    diagonal in the singular-value layout ``(*trailing, min(n1, n2))``.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    X = as_tensor(X)
    sigma = transform_singular_values(X, spec)
    total = math.fsum(np.ravel(_diag_weights(W, X) * sigma**p)) / math.sqrt(spec.c)
    return total ** (1 / p)


def _check_axes(axes, ndim):
    axes = tuple(axes)
    if not axes:
        raise ValueError("the set of smoothness axes must be nonempty")
    for k in axes:
        if k not in (0, 1, 2) or k >= ndim:
            raise ValueError(f"invalid smoothness axis {k}")
    return axes


def tv_norm(X, axes):
    """Anisotropic cyclic TV: sum of l1 norms of the gradient tensors."""
    X = as_tensor(X)
    return math.fsum(float(np.sum(np.abs(grad(X, k)))) for k in _check_axes(axes, X.ndim))


def twctv_norm(X, W, p, axes, spec, sigmoid_m=10.0):
    """Weighted correlated TV: mean over ``axes`` of gradient Schatten-p norms.

    With ``W=None`` each gradient is weighted adaptively from its own
    transform-domain singular values by the sigmoid rule.
    """
    from .shrinkage import compute_sv_weights

    X = as_tensor(X)
    axes = _check_axes(axes, X.ndim)
    total = 0.0
    for k in axes:
        G = grad(X, k)
        Wk = compute_sv_weights(transform_singular_values(G, spec), sigmoid_m).values if W is None else W
        total += weighted_schatten_p_norm(G, Wk, p, spec)
    return total / len(axes)
