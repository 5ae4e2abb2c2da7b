import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twctv.gradient import (
    build_spectrum_cache,
    difference_matrix,
    difference_spectrum,
    grad,
    grad_adjoint,
    normal_operator,
    solve_x_subproblem,
)
from twctv.tensor import ShapeError, mode_k_product


def dense_operator(shape, axis):
    """Explicit matrix of grad along ``axis`` acting on C-order vectors."""
    mats = [np.eye(n) for n in shape]
    mats[axis] = difference_matrix(shape[axis])
    out = mats[0]
    for M in mats[1:]:
        out = np.kron(out, M)
    return out


def test_difference_matrix_small():
    D = difference_matrix(3)
    np.testing.assert_array_equal(D, [[-1, 1, 0], [0, -1, 1], [1, 0, -1]])


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_grad_is_mode_product_with_difference_matrix(axis):
    rng = np.random.default_rng(axis)
    X = rng.standard_normal((4, 5, 3))
    D = difference_matrix(X.shape[axis])
    np.testing.assert_allclose(grad(X, axis), mode_k_product(X, D, axis), atol=1e-14)
    np.testing.assert_allclose(grad_adjoint(X, axis), mode_k_product(X, D.T, axis), atol=1e-14)


def test_grad_known_values():
    X = np.arange(4.0).reshape(4, 1, 1)
    np.testing.assert_array_equal(grad(X, 0).ravel(), [1, 1, 1, -3])
    np.testing.assert_array_equal(grad_adjoint(X, 0).ravel(), [3, -1, -1, -1])


def test_grad_constant_is_zero():
    C = np.full((3, 4, 2, 2), 1.7)
    for k in range(3):
        np.testing.assert_array_equal(grad(C, k), 0.0)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**20),
    shape=st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6)),
    axis=st.integers(0, 2),
)
def test_adjoint_identity(seed, shape, axis):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(shape)
    Y = rng.standard_normal(shape)
    lhs = np.vdot(grad(X, axis), Y)
    rhs = np.vdot(X, grad_adjoint(Y, axis))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(X) * np.linalg.norm(Y))


def test_grad_axis_validation():
    X = np.zeros((3, 3, 3, 3))
    with pytest.raises(ValueError):
        grad(X, 3)
    with pytest.raises(ValueError):
        grad_adjoint(np.zeros((3, 3)), 2)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 13])
def test_difference_spectrum_matches_fft(n):
    D = difference_matrix(n)
    fft_col = np.abs(np.fft.fft(D[:, 0])) ** 2
    np.testing.assert_allclose(difference_spectrum(n), fft_col, atol=1e-12)
    np.testing.assert_allclose(np.sort(difference_spectrum(n)), np.sort(np.linalg.eigvalsh(D.T @ D)), atol=1e-12)


@pytest.mark.parametrize("axes", [(0,), (0, 1), (0, 1, 2), (1, 2)])
def test_x_subproblem_matches_dense_solve(axes):
    rng = np.random.default_rng(len(axes))
    shape = (8, 8, 4)
    R = rng.standard_normal(shape)
    T = {k: rng.standard_normal(shape) for k in axes}
    cache = build_spectrum_cache(shape, axes)
    X = solve_x_subproblem(R, T, cache)

    N = int(np.prod(shape))
    A = np.eye(N)
    b = R.ravel().copy()
    for k in axes:
        G = dense_operator(shape, k)
        A += G.T @ G
        b += G.T @ T[k].ravel()
    ref = np.linalg.solve(A, b).reshape(shape)
    assert np.linalg.norm(X - ref) <= 1e-10 * np.linalg.norm(ref)
    # list form gives the same answer
    np.testing.assert_allclose(solve_x_subproblem(R, [T[k] for k in axes], cache), X, atol=1e-14)


def test_x_subproblem_residual_with_odd_extents():
    rng = np.random.default_rng(9)
    shape = (7, 5, 3, 3)
    axes = (0, 1, 2)
    R = rng.standard_normal(shape)
    T = [rng.standard_normal(shape) for _ in axes]
    X = solve_x_subproblem(R, T, build_spectrum_cache(shape, axes))
    rhs = R + sum(grad_adjoint(t, k) for k, t in zip(axes, T))
    assert np.linalg.norm(normal_operator(X, axes) - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_x_subproblem_validation():
    cache = build_spectrum_cache((4, 4, 2), (0, 1))
    with pytest.raises(ShapeError):
        solve_x_subproblem(np.zeros((4, 4, 3)), [np.zeros((4, 4, 3))] * 2, cache)
    with pytest.raises(ValueError):
        solve_x_subproblem(np.zeros((4, 4, 2)), [np.zeros((4, 4, 2))], cache)
    with pytest.raises(ValueError):
        build_spectrum_cache((4, 4, 2), (3,))
    empty = build_spectrum_cache((4, 4, 2), ())
    R = np.ones((4, 4, 2))
    np.testing.assert_array_equal(solve_x_subproblem(R, [], empty), R)
