"""ADMM solver for robust low-rank tensor completion with TWCTV regularization.

Solves

    min_{X,E}  (1/|G|) sum_{k in G} ||grad_k X||_{W,S_p} + lambda ||E||_{W_E,1}
    s.t.       P_Omega(M) = X + E,

with splitting variables ``G_k = grad_k X``. Three modes share the loop:

* ``completion`` -- no corruption; an auxiliary ``K`` supported off the
  observation set absorbs the missing entries.
* ``trpca`` -- every entry observed, ``E`` is sparse corruption.
* ``rlrtc`` -- partial observations plus sparse corruption on them.
"""

import enum
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .gradient import build_spectrum_cache, grad, solve_x_subproblem
from .shrinkage import gtsvt, soft_threshold_weighted, sparse_weights
from .tensor import ShapeError, as_tensor
from .transforms import Family, build_transform

__all__ = [
    "Mode",
    "SolverConfig",
    "IterationRecord",
    "RecoveryResult",
    "DivergenceError",
    "default_lambda",
    "default_axes",
    "convergence_check",
    "SolverState",
    "admm_iteration",
    "rlrtc_solve",
]

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    COMPLETION = "completion"
    TRPCA = "trpca"
    RLRTC = "rlrtc"


class DivergenceError(ArithmeticError):
    """Non-finite values appeared in an iterate."""

    def __init__(self, iteration, variable):
        super().__init__(f"non-finite values in {variable} at iteration {iteration}")
        self.iteration = iteration
        self.variable = variable


def default_lambda(shape):
    """``1 / sqrt(prod(shape) / min(n1, n2))``."""
    shape = tuple(shape)
    if len(shape) < 3:
        raise ShapeError("default lambda needs an order >= 3 shape")
    return 1.0 / math.sqrt(math.prod(shape) / min(shape[0], shape[1]))


def default_axes(shape):
    """Smoothness axes: spatial only for color images, else the first three modes."""
    shape = tuple(shape)
    if len(shape) == 3 and shape[2] == 3:
        return (0, 1)
    return (0, 1, 2)


@dataclass(frozen=True)
class SolverConfig:
    """ADMM hyperparameters.

    ``lam=None`` resolves to :func:`default_lambda` and ``axes=None`` to
    :func:`default_axes` at solve time. ``sv_weights`` selects adaptive
    sigmoid weights (``"adaptive"``) or uniform unit weights
    (``"uniform"``, the unweighted baseline). ``sparse_weighting`` switches
    between adaptive weighted l1 and plain l1 for ``E``.
    ``impute_unobserved`` only matters in ``rlrtc`` mode: when true the
    sparse variable is left free off the observation set (like ``K`` in
    completion), otherwise it is held at zero there.
    """

    mode: Mode = Mode.COMPLETION
    p: float = 0.9
    lam: float = None
    mu0: float = 1e-4
    rho: float = 1.1
    mu_max: float = 1e10
    epsilon: float = 1e-8
    t_max: int = 500
    c_E: float = 2.0
    sigmoid_m: float = 10.0
    axes: tuple = None
    transform: Family = Family.DCT
    seed: int = 0
    sv_weights: str = "adaptive"
    sparse_weighting: bool = True
    impute_unobserved: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "transform", Family.parse(self.transform))
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))
        self.validate()

    def validate(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.mu0 < self.mu_max:
            raise ValueError("need 0 < mu0 < mu_max")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if int(self.t_max) < 1:
            raise ValueError("t_max must be a positive integer")
        if not self.c_E > 0 or not self.sigmoid_m > 0:
            raise ValueError("c_E and sigmoid_m must be positive")
        if self.axes is not None:
            if not self.axes or any(a not in (0, 1, 2) for a in self.axes) or len(set(self.axes)) != len(self.axes):
                raise ValueError(f"axes must be a nonempty subset of {{0, 1, 2}}, got {self.axes}")
        if self.sv_weights not in ("adaptive", "uniform"):
            raise ValueError("sv_weights must be 'adaptive' or 'uniform'")

    def resolve(self, shape):
        """Copy with ``lam`` and ``axes`` filled in for ``shape``."""
        axes = self.axes if self.axes is not None else default_axes(shape)
        if any(a >= len(shape) for a in axes):
            raise ValueError(f"axes {axes} out of range for shape {tuple(shape)}")
        lam = self.lam if self.lam is not None else default_lambda(shape)
        return replace(self, axes=axes, lam=lam)

    def to_dict(self):
        d = asdict(self)
        d["mode"] = self.mode.value
        d["transform"] = self.transform.value
        d["axes"] = None if self.axes is None else list(self.axes)
        return d


@dataclass(frozen=True)
class IterationRecord:
    t: int
    dx_inf: float
    de_inf: float
    feas_inf: float
    mu: float
    rel_dx: float
    rel_de: float
    seconds: float


@dataclass
class RecoveryResult:
    X: np.ndarray
    E: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    config: SolverConfig = None

    def history_array(self, name):
        return np.array([getattr(r, name) for r in self.history])


def convergence_check(X_prev, E_prev, X_next, E_next, observed, epsilon):
    """Three infinity-norm stopping quantities and their conjunction.

    ``observed`` is ``P_Omega(M)``. Returns ``(ok, dx, de, feas)``.
    """
    dx = float(np.max(np.abs(X_next - X_prev), initial=0.0))
    de = float(np.max(np.abs(E_next - E_prev), initial=0.0))
    feas = float(np.max(np.abs(observed - X_next - E_next), initial=0.0))
    return (dx <= epsilon and de <= epsilon and feas <= epsilon), dx, de, feas


def _rel_change(new, old):
    den = np.linalg.norm(old)
    if den == 0:
        return 1.0 if np.any(new != old) else 0.0
    return min(1.0, float(np.linalg.norm(new - old) / den))


@dataclass
class SolverState:
    """ADMM iterate. ``E`` doubles as ``K`` in completion mode."""

    X: np.ndarray
    E: np.ndarray
    G: dict
    Y: dict
    ups: np.ndarray
    W_E: np.ndarray
    mu: float
    t: int = 0

    @classmethod
    def zeros(cls, shape, axes, mu0):
        z = np.zeros(shape)
        return cls(
            X=z.copy(),
            E=z.copy(),
            G={k: z.copy() for k in axes},
            Y={k: z.copy() for k in axes},
            ups=z.copy(),
            W_E=np.ones(shape),
            mu=float(mu0),
        )


class _Problem:
    """Loop invariants of one solve."""

    def __init__(self, M, mask, cfg, transform):
        self.cfg = cfg
        self.mask = mask
        self.unobserved = ~mask
        self.observed = np.where(mask, M, 0.0)
        self.transform = transform
        self.cache = build_spectrum_cache(M.shape, cfg.axes)
        self.completion = cfg.mode is Mode.COMPLETION
        self.free_off_mask = self.completion or (cfg.mode is Mode.RLRTC and cfg.impute_unobserved)
        self.sv_weights = None if cfg.sv_weights == "adaptive" else 1.0


def admm_iteration(state, problem, timings=None):
    """One pass of the X, G, E/K and multiplier updates; returns the new state."""
    cfg = problem.cfg
    axes = cfg.axes
    mu = state.mu
    clock = time.perf_counter

    tic = clock()
    rhs = problem.observed - state.E + state.ups / mu
    X = solve_x_subproblem(rhs, [state.G[k] - state.Y[k] / mu for k in axes], problem.cache)
    t = state.t + 1
    # the SVD below would fail on non-finite input, so check X first
    if not np.all(np.isfinite(X)):
        raise DivergenceError(t, "X")
    toc = clock()

    grads = {k: grad(X, k) for k in axes}
    tau = 1.0 / (len(axes) * mu)
    try:
        G = {
            k: gtsvt(grads[k] + state.Y[k] / mu, tau, cfg.p, problem.transform, cfg.sigmoid_m, problem.sv_weights)
            for k in axes
        }
    except np.linalg.LinAlgError as exc:
        raise DivergenceError(t, "G") from exc
    tac = clock()

    resid = problem.observed - X + state.ups / mu
    W_E = state.W_E
    if problem.completion:
        E = np.where(problem.unobserved, resid, 0.0)
    else:
        shrunk = soft_threshold_weighted(resid, (cfg.lam / mu) * W_E)
        E = np.where(problem.mask, shrunk, resid if problem.free_off_mask else 0.0)
        if cfg.sparse_weighting:
            sample = problem.mask if problem.free_off_mask else None
            W_E = sparse_weights(np.where(problem.mask, E, 0.0), cfg.c_E, mask=sample).values
    tec = clock()

    Y = {k: state.Y[k] + mu * (grads[k] - G[k]) for k in axes}
    ups = state.ups + mu * (problem.observed - X - E)
    if timings is not None:
        timings["x_update"] += toc - tic
        timings["g_update"] += tac - toc
        timings["e_update"] += tec - tac
        timings["multipliers"] += clock() - tec

    for name, val in (("E", E), ("multiplier", ups)):
        if not np.all(np.isfinite(val)):
            raise DivergenceError(t, name)
    return SolverState(X, E, G, Y, ups, W_E, min(cfg.rho * mu, cfg.mu_max), t)


def rlrtc_solve(M, mask, config=None, callback=None, transform=None):
    """Recover a low-rank tensor from partial and/or corrupted observations.

    Parameters
    ----------
    M : ndarray
        Observed tensor (values off ``mask`` are ignored).
    mask : ndarray of bool or None
        Observation set; ``None`` means every entry is observed.
    config : SolverConfig, optional
    callback : callable, optional
        Called with each :class:`IterationRecord`.
    transform : TransformSpec, optional
        Prebuilt transform; built from ``config.transform`` otherwise.

    Returns
    -------
    RecoveryResult
        ``E`` holds the sparse component, or ``K`` in completion mode.
        ``history[t-1].mu`` is the penalty used in iteration ``t``.
    """
    t_start = time.perf_counter()
    config = SolverConfig() if config is None else config
    M = as_tensor(M)
    if np.iscomplexobj(M):
        raise ValueError("observations must be real")
    mask = np.ones(M.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != M.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match {M.shape}")
    if config.mode is Mode.TRPCA and not mask.all():
        raise ValueError("trpca mode needs every entry observed; use rlrtc for partial masks")
    cfg = config.resolve(M.shape)
    if transform is None:
        transform = build_transform(cfg.transform, M.shape, cfg.seed)
    else:
        transform.check(M)
    problem = _Problem(M, mask, cfg, transform)
    if not np.all(np.isfinite(problem.observed)):
        raise ValueError("observed entries must be finite")

    state = SolverState.zeros(M.shape, cfg.axes, cfg.mu0)
    timings = {"x_update": 0.0, "g_update": 0.0, "e_update": 0.0, "multipliers": 0.0}
    history = []
    converged = False
    while state.t < cfg.t_max:
        new = admm_iteration(state, problem, timings)
        ok, dx, de, feas = convergence_check(state.X, state.E, new.X, new.E, problem.observed, cfg.epsilon)
        record = IterationRecord(
            new.t,
            dx,
            de,
            feas,
            state.mu,
            _rel_change(new.X, state.X),
            _rel_change(new.E, state.E),
            time.perf_counter() - t_start,
        )
        history.append(record)
        if callback is not None:
            callback(record)
        state = new
        if ok:
            converged = True
            break

    timings["total"] = time.perf_counter() - t_start
    log.debug("rlrtc_solve: %d iterations, converged=%s, %.2fs", state.t, converged, timings["total"])
    return RecoveryResult(state.X, state.E, state.t, converged, history, timings, cfg)
