import math

import numpy as np
import pytest

import twctv.admm as admm
from twctv.admm import (
    DivergenceError,
    Mode,
    SolverConfig,
    SolverState,
    _Problem,
    admm_iteration,
    convergence_check,
    default_axes,
    default_lambda,
    rlrtc_solve,
)
from twctv.experiments import gen_bernoulli_mask, gen_synthetic, relative_error, SyntheticSpec
from twctv.gradient import grad, normal_operator, grad_adjoint
from twctv.tensor import ShapeError
from twctv.transforms import build_transform


def low_rank(shape=(12, 12, 4), rank=1, seed=0):
    return gen_synthetic(SyntheticSpec(shape, rank, "dct", seed))


def test_default_lambda():
    assert default_lambda((30, 30, 20, 20)) == pytest.approx(1 / math.sqrt(12000))
    assert default_lambda((80, 60, 20)) == pytest.approx(1 / math.sqrt(80 * 20))
    with pytest.raises(ShapeError):
        default_lambda((3, 3))


def test_default_axes():
    assert default_axes((64, 64, 3)) == (0, 1)
    assert default_axes((64, 64, 31)) == (0, 1, 2)
    assert default_axes((10, 10, 3, 4)) == (0, 1, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"p": 0.0},
        {"p": 1.2},
        {"lam": -1.0},
        {"rho": 1.0},
        {"mu0": 0.0},
        {"mu0": 1e11},
        {"epsilon": 0.0},
        {"t_max": 0},
        {"c_E": 0.0},
        {"axes": (0, 3)},
        {"axes": ()},
        {"axes": (0, 0)},
        {"sv_weights": "other"},
        {"mode": "nope"},
        {"transform": "wavelet9"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_config_resolve_and_dict():
    cfg = SolverConfig(mode="trpca", transform="DFT", axes=[1, 0])
    assert cfg.mode is Mode.TRPCA and cfg.axes == (1, 0)
    r = cfg.resolve((10, 8, 5))
    assert r.lam == pytest.approx(default_lambda((10, 8, 5)))
    d = r.to_dict()
    assert d["mode"] == "trpca" and d["transform"] == "dft" and d["axes"] == [1, 0]
    with pytest.raises(ValueError):
        SolverConfig(axes=(2,)).resolve((4, 4))


def test_convergence_check_hand_values():
    z = np.zeros((2, 2, 1))
    X1 = z.copy()
    X1[0, 0, 0] = 1e-9
    E1 = z.copy()
    E1[1, 1, 0] = -2e-9
    obs = z.copy()
    ok, dx, de, feas = convergence_check(z, z, X1, E1, obs, 1e-8)
    assert ok and dx == 1e-9 and de == 2e-9 and feas == 2e-9
    ok, *_ = convergence_check(z, z, X1, E1, obs, 1e-9)
    assert not ok


def _state_after(M, mask, cfg, steps):
    cfg = cfg.resolve(M.shape)
    spec = build_transform(cfg.transform, M.shape, cfg.seed)
    problem = _Problem(M, mask, cfg, spec)
    state = SolverState.zeros(M.shape, cfg.axes, cfg.mu0)
    for _ in range(steps):
        state = admm_iteration(state, problem)
    return state, problem


@pytest.mark.parametrize("mode", ["completion", "trpca", "rlrtc"])
def test_single_iteration_invariants(mode):
    M = low_rank((10, 9, 4), 2, seed=1)
    mask = None if mode == "trpca" else gen_bernoulli_mask(M.shape, 0.6, seed=2)
    full = np.ones(M.shape, bool) if mask is None else mask
    cfg = SolverConfig(mode=mode, mu0=0.5, p=0.7)
    state, problem = _state_after(M, full, cfg, 3)
    new = admm_iteration(state, problem)
    mu = state.mu
    axes = problem.cfg.axes

    # X solves the normal equations of its quadratic subproblem
    rhs = problem.observed - state.E + state.ups / mu
    rhs = rhs + sum(grad_adjoint(state.G[k] - state.Y[k] / mu, k) for k in axes)
    res = normal_operator(new.X, axes) - rhs
    assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(rhs)

    # dual ascent on both constraint families
    for k in axes:
        np.testing.assert_allclose(new.Y[k], state.Y[k] + mu * (grad(new.X, k) - new.G[k]), atol=1e-12)
    np.testing.assert_allclose(new.ups, state.ups + mu * (problem.observed - new.X - new.E), atol=1e-12)

    assert new.mu == pytest.approx(min(cfg.rho * mu, cfg.mu_max))
    assert new.t == state.t + 1
    if mode == "completion":
        assert np.all(new.E[full] == 0)
    if mode == "trpca":
        # shrinkage: |E| never exceeds the residual it was computed from
        resid = problem.observed - new.X + state.ups / mu
        assert np.all(np.abs(new.E) <= np.abs(resid) + 1e-15)


def test_rlrtc_zero_off_mask_variant():
    M = low_rank((8, 8, 3), 1, seed=3)
    mask = gen_bernoulli_mask(M.shape, 0.5, seed=4)
    cfg = SolverConfig(mode="rlrtc", impute_unobserved=False, mu0=0.1)
    state, _ = _state_after(M, mask, cfg, 4)
    assert np.all(state.E[~mask] == 0)
    cfg = SolverConfig(mode="rlrtc", impute_unobserved=True, mu0=0.1)
    state, _ = _state_after(M, mask, cfg, 4)
    assert np.any(state.E[~mask] != 0)


def test_completion_recovers_small_low_rank():
    M = low_rank((16, 16, 6), 1, seed=5)
    mask = gen_bernoulli_mask(M.shape, 0.6, seed=6)
    res = rlrtc_solve(M, mask, SolverConfig(p=0.7, axes=(0, 1)))
    assert res.converged
    assert relative_error(res.X, M) < 1e-4
    np.testing.assert_allclose(res.X[mask], M[mask], atol=1e-7)


def test_trpca_separates_sparse_corruption():
    rng = np.random.default_rng(7)
    L = low_rank((20, 20, 5), 1, seed=7)
    S = np.zeros_like(L)
    idx = rng.random(L.shape) < 0.05
    S[idx] = rng.choice([-1.0, 1.0], idx.sum())
    res = rlrtc_solve(L + S, None, SolverConfig(mode="trpca", p=0.9, axes=(0, 1)))
    assert relative_error(res.X, L) < 1e-2
    assert np.linalg.norm(L + S - res.X - res.E) < 1e-6


def test_history_and_mu_schedule():
    M = low_rank((8, 8, 3), 1, seed=8)
    mask = gen_bernoulli_mask(M.shape, 0.7, seed=9)
    cfg = SolverConfig(t_max=15, mu0=1e-3, rho=1.5, mu_max=0.02)
    seen = []
    res = rlrtc_solve(M, mask, cfg, callback=seen.append)
    assert not res.converged and res.iterations == 15
    assert seen == res.history
    mus = res.history_array("mu")
    expected = np.minimum(1e-3 * 1.5 ** np.arange(15), 0.02)
    np.testing.assert_allclose(mus, expected)
    assert [r.t for r in res.history] == list(range(1, 16))
    assert set(res.timings) >= {"x_update", "g_update", "e_update", "multipliers", "total"}


def test_solver_is_deterministic():
    M = low_rank((8, 8, 4), 2, seed=10)
    mask = gen_bernoulli_mask(M.shape, 0.5, seed=11)
    cfg = SolverConfig(t_max=30, transform="rot", seed=3)
    a = rlrtc_solve(M, mask, cfg)
    b = rlrtc_solve(M, mask, cfg)
    np.testing.assert_array_equal(a.X, b.X)


def test_input_validation():
    M = np.zeros((4, 4, 2))
    with pytest.raises(ShapeError):
        rlrtc_solve(M, np.ones((4, 4), bool))
    with pytest.raises(ValueError):
        rlrtc_solve(M, np.zeros(M.shape, bool), SolverConfig(mode="trpca"))
    bad = M.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        rlrtc_solve(bad, None)
    with pytest.raises(ValueError):
        rlrtc_solve(M.astype(complex), None)


def test_divergence_is_reported(monkeypatch):
    def broken(rhs, targets, cache, workers=None):
        return np.full(cache.shape, np.inf)

    monkeypatch.setattr(admm, "solve_x_subproblem", broken)
    with pytest.raises(DivergenceError) as info:
        rlrtc_solve(low_rank((6, 6, 2), 1), None)
    assert info.value.iteration == 1 and info.value.variable == "X"


def test_zero_observations_stay_zero():
    res = rlrtc_solve(np.zeros((6, 6, 3)), None, SolverConfig(mode="trpca"))
    assert res.converged and res.iterations == 1
    np.testing.assert_array_equal(res.X, 0.0)
