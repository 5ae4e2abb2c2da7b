"""Synthetic data, corruption models, quality metrics and experiment protocols."""

import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.ndimage

from .admm import Mode, SolverConfig, rlrtc_solve
from .tensor import ShapeError, frobenius_norm
from .transforms import Family, build_transform, m_product

__all__ = [
    "SyntheticSpec",
    "PhaseGrid",
    "MetricsRecord",
    "gen_synthetic",
    "gen_bernoulli_mask",
    "add_salt_pepper",
    "add_outliers",
    "relative_error",
    "psnr",
    "ergas",
    "solver_residual",
    "transform_comparison",
    "desk_phase_grid",
    "phase_transition",
    "p_sensitivity",
    "ablation",
    "foreground_mask",
    "precision_recall_f",
    "moving_block_video",
    "rgb_test_card",
]

log = logging.getLogger(__name__)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class SyntheticSpec:
    shape: tuple
    rank: int
    transform: Family = Family.DCT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "transform", Family.parse(self.transform))
        if len(self.shape) < 3:
            raise ShapeError("synthetic tensors need order >= 3")
        if not 0 <= self.rank <= min(self.shape[:2]):
            raise ValueError(f"rank {self.rank} must lie in [0, min(n1, n2)] for shape {self.shape}")


def gen_synthetic(spec, transform=None):
    """Low-tubal-rank tensor ``M1 *_M M2`` with ``N(0, 1/n1)`` factor entries."""
    n1, n2, *trailing = spec.shape
    if spec.rank == 0:
        return np.zeros(spec.shape)
    if transform is None:
        transform = build_transform(spec.transform, spec.shape, spec.seed)
    rng = _rng(spec.seed)
    scale = 1.0 / math.sqrt(n1)
    M1 = rng.normal(0.0, scale, (n1, spec.rank, *trailing))
    M2 = rng.normal(0.0, scale, (spec.rank, n2, *trailing))
    return m_product(M1, M2, transform)


def gen_bernoulli_mask(shape, sampling_rate, seed=0):
    """Observation mask with exactly ``floor(rate * N)`` entries drawn without replacement."""
    if not 0.0 <= sampling_rate <= 1.0:
        raise ValueError("sampling rate must lie in [0, 1]")
    shape = tuple(shape)
    n = math.prod(shape)
    m = math.floor(sampling_rate * n)
    mask = np.zeros(n, dtype=bool)
    mask[_rng(seed).choice(n, size=m, replace=False)] = True
    return mask.reshape(shape)


def add_salt_pepper(X, level, seed=0):
    """Replace ``round(level * N)`` random entries, half with 0 and half with 1.

    With an odd count the extra entry goes to 0. Data must already lie in
    ``[0, 1]``.
    """
    X = np.asarray(X, dtype=float)
    if not 0.0 <= level <= 1.0:
        raise ValueError("noise level must lie in [0, 1]")
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        raise ValueError("salt-and-pepper noise expects data normalized to [0, 1]")
    count = int(round(level * X.size))
    idx = _rng(seed).choice(X.size, size=count, replace=False)
    out = X.copy().ravel()
    n_salt = count // 2
    out[idx[: count - n_salt]] = 0.0
    out[idx[count - n_salt :]] = 1.0
    return out.reshape(X.shape)


def add_outliers(X, ratio, magnitude=0.4, seed=0, support=None):
    """Add ``+-magnitude`` spikes with random sign on a uniform random support.

    ``support`` restricts where spikes may land (e.g. the observed set).
    Returns ``(corrupted, sparse)`` where ``sparse`` is the added tensor.
    """
    X = np.asarray(X, dtype=float)
    rng = _rng(seed)
    candidates = np.flatnonzero(np.ones(X.size, bool) if support is None else np.asarray(support).ravel())
    count = int(round(ratio * candidates.size))
    idx = rng.choice(candidates, size=count, replace=False)
    E = np.zeros(X.size)
    E[idx] = magnitude * rng.choice([-1.0, 1.0], size=count)
    E = E.reshape(X.shape)
    return X + E, E


def relative_error(X_hat, X_ref):
    ref = frobenius_norm(X_ref)
    if ref == 0.0:
        raise ValueError("relative error is undefined for a zero reference")
    return frobenius_norm(np.asarray(X_hat) - np.asarray(X_ref)) / ref


def psnr(X_hat, X_ref, peak=1.0):
    """``10 log10(peak^2 N / ||X_hat - X_ref||_F^2)``; ``inf`` for identical inputs."""
    X_hat, X_ref = np.asarray(X_hat, float), np.asarray(X_ref, float)
    if X_hat.shape != X_ref.shape:
        raise ShapeError("PSNR needs equal shapes")
    if peak <= 0:
        raise ValueError("peak must be positive")
    err = float(np.sum((X_hat - X_ref) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 * X_ref.size / err)


def ergas(X_hat, X_ref, band_axis=2):
    """``100 sqrt(mean_b (RMSE_b / mean_b)^2)`` over slices along ``band_axis``.

    Bands whose reference mean is zero are skipped with a warning.
    """
    X_hat, X_ref = np.asarray(X_hat, float), np.asarray(X_ref, float)
    if X_hat.shape != X_ref.shape:
        raise ShapeError("ERGAS needs equal shapes")
    other = tuple(a for a in range(X_ref.ndim) if a != band_axis % X_ref.ndim)
    rmse = np.sqrt(np.mean((X_hat - X_ref) ** 2, axis=other))
    mean = np.mean(X_ref, axis=other)
    keep = mean != 0
    if not keep.all():
        warnings.warn(f"ERGAS: skipping {int((~keep).sum())} band(s) with zero mean", RuntimeWarning, stacklevel=2)
    if not keep.any():
        return math.nan
    return 100.0 * math.sqrt(float(np.mean((rmse[keep] / mean[keep]) ** 2)))


def solver_residual(M, mask, result):
    """``||P_Omega(M) - X - E||_F`` restricted to the observed entries."""
    mask = np.ones(np.shape(M), bool) if mask is None else np.asarray(mask, bool)
    return frobenius_norm(np.where(mask, np.asarray(M) - result.X - result.E, 0.0))


@dataclass
class MetricsRecord:
    relative_error: float = None
    psnr: float = None
    ergas: float = None
    precision: float = None
    recall: float = None
    f_measure: float = None

    def to_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            if v is None:
                continue
            out[k] = "inf" if (isinstance(v, float) and math.isinf(v)) else v
        if self.psnr is not None:
            out["psnr_infinite"] = math.isinf(self.psnr)
        return out


def transform_comparison(shape=(30, 30, 20, 20), rank=3, sampling_rate=0.5, families=tuple(Family), seed=0, config=None):
    """Recover one synthetic instance per transform family.

    The tensor is generated under the family being tested, as in the
    transform study. Returns ``{family: (relative error, seconds, result)}``.
    """
    config = SolverConfig(mode=Mode.COMPLETION) if config is None else config
    out = {}
    for fam in families:
        fam = Family.parse(fam)
        T = build_transform(fam, shape, seed)
        M = gen_synthetic(SyntheticSpec(shape, rank, fam, seed), T)
        mask = gen_bernoulli_mask(shape, sampling_rate, seed + 1)
        cfg = replace(config, transform=fam, mode=Mode.COMPLETION, seed=seed)
        t0 = time.perf_counter()
        res = rlrtc_solve(M, mask, cfg, transform=T)
        out[fam] = (relative_error(res.X, M), time.perf_counter() - t0, res)
    return out


@dataclass
class PhaseGrid:
    """Success counts over a (rank, sampling rate) grid."""

    ranks: tuple
    rates: tuple
    trials: int = 3
    threshold: float = 1e-3
    counts: np.ndarray = None

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        self.rates = tuple(float(s) for s in self.rates)
        if self.counts is None:
            self.counts = np.zeros((len(self.ranks), len(self.rates)), dtype=int)

    @property
    def total(self):
        return int(self.counts.sum())

    def to_csv(self):
        lines = ["rank," + ",".join(f"{s:g}" for s in self.rates)]
        for r, row in zip(self.ranks, self.counts):
            lines.append(f"{r}," + ",".join(str(int(c)) for c in row))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {
            "ranks": list(self.ranks),
            "rates": list(self.rates),
            "trials": self.trials,
            "threshold": self.threshold,
            "counts": self.counts.tolist(),
            "total": self.total,
        }


DESK_PHASE_SHAPE = (20, 20, 10)


def desk_phase_grid(trials=3):
    return PhaseGrid(ranks=tuple(range(1, 9)), rates=tuple(np.round(np.arange(1, 10) / 10, 2)), trials=trials)


def _job_seed(seed, *key):
    return np.random.SeedSequence([int(seed), *[int(k) for k in key]]).generate_state(1)[0]


def phase_transition(grid, config=None, shape=DESK_PHASE_SHAPE, seed=0, progress=None):
    """Fill ``grid.counts`` with successful completions per cell.

    Each trial draws a fresh rank-``r`` tensor and a Bernoulli mask from a
    seed derived from ``(seed, rank index, rate index, trial)``, so weighted
    and unweighted runs over the same grid see identical problems.
    """
    config = SolverConfig(mode=Mode.COMPLETION) if config is None else replace(config, mode=Mode.COMPLETION)
    T = build_transform(config.transform, shape, config.seed)
    counts = np.zeros((len(grid.ranks), len(grid.rates)), dtype=int)
    for i, r in enumerate(grid.ranks):
        for j, rate in enumerate(grid.rates):
            for trial in range(grid.trials):
                s = _job_seed(seed, i, j, trial)
                M = gen_synthetic(SyntheticSpec(shape, r, config.transform, s), T)
                mask = gen_bernoulli_mask(shape, rate, s + 1)
                res = rlrtc_solve(M, mask, config, transform=T)
                if relative_error(res.X, M) < grid.threshold:
                    counts[i, j] += 1
            if progress is not None:
                progress(r, rate, int(counts[i, j]))
    grid.counts = counts
    return grid


def _robust_instance(shape, rank, sampling_rate, corruption, magnitude, seed, transform):
    T = build_transform(transform, shape, 0)
    M0 = gen_synthetic(SyntheticSpec(shape, rank, transform, _job_seed(seed, 0)), T)
    mask = gen_bernoulli_mask(shape, sampling_rate, _job_seed(seed, 1))
    M, E = add_outliers(M0, corruption, magnitude, _job_seed(seed, 2), support=mask)
    return T, M0, M, mask


def p_sensitivity(
    ps=tuple(np.round(np.arange(1, 10) / 10, 1)),
    shape=(80, 80, 20),
    rank=5,
    sampling_rate=0.08,
    corruption=0.02,
    magnitude=0.4,
    trials=10,
    seed=0,
    config=None,
):
    """Solver residual, time and iterations against the Schatten exponent.

    Returns a list of dicts, one per ``(p, trial)``.
    """
    config = SolverConfig(mode=Mode.RLRTC) if config is None else replace(config, mode=Mode.RLRTC)
    rows = []
    for trial in range(trials):
        T, M0, M, mask = _robust_instance(
            shape, rank, sampling_rate, corruption, magnitude, _job_seed(seed, trial), config.transform
        )
        for p in ps:
            t0 = time.perf_counter()
            res = rlrtc_solve(M, mask, replace(config, p=float(p)), transform=T)
            rows.append(
                {
                    "p": float(p),
                    "trial": trial,
                    "residual": solver_residual(M, mask, res),
                    "relative_error": relative_error(res.X, M0),
                    "seconds": time.perf_counter() - t0,
                    "iterations": res.iterations,
                    "converged": res.converged,
                }
            )
    return rows


def ablation(
    shape=(80, 80, 20), rank=5, sampling_rate=0.08, corruption=0.02, magnitude=0.4, p=0.9, seeds=(0, 1, 2), config=None
):
    """Weighted l1 against plain l1 on the sparse term, same instances.

    Returns a list of dicts with the solver residual of both models.
    """
    config = SolverConfig(mode=Mode.RLRTC, p=p) if config is None else replace(config, mode=Mode.RLRTC, p=p)
    rows = []
    for seed in seeds:
        T, M0, M, mask = _robust_instance(shape, rank, sampling_rate, corruption, magnitude, seed, config.transform)
        row = {"seed": seed}
        for name, weighted in (("weighted", True), ("plain", False)):
            t0 = time.perf_counter()
            res = rlrtc_solve(M, mask, replace(config, sparse_weighting=weighted), transform=T)
            row[f"{name}_residual"] = solver_residual(M, mask, res)
            row[f"{name}_relative_error"] = relative_error(res.X, M0)
            row[f"{name}_iterations"] = res.iterations
            row[f"{name}_seconds"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def foreground_mask(E, window=5):
    """Binary foreground per frame from a sparse component.

    Frames run along the last axis. In each frame an entry is foreground
    when its magnitude exceeds the standard deviation of that frame;
    channel axes (order-4 input) are merged with ``any``. The binary map
    is then cleaned with a ``window x window`` median filter using
    replicate padding.

    Returns
    -------
    ndarray of bool, shape ``(h, w, frames)``
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("median window must be a positive odd integer")
    E = np.abs(np.asarray(E, dtype=float))
    if E.ndim not in (3, 4):
        raise ShapeError("expected (h, w, frames) or (h, w, channels, frames)")
    frames = E.shape[-1]
    out = np.zeros((E.shape[0], E.shape[1], frames), dtype=bool)
    for f in range(frames):
        frame = E[..., f]
        binary = frame > frame.std()
        if binary.ndim == 3:
            binary = binary.any(axis=2)
        out[..., f] = scipy.ndimage.median_filter(binary.astype(np.uint8), size=window, mode="nearest").astype(bool)
    return out


def precision_recall_f(mask, truth):
    mask = np.asarray(mask, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if mask.shape != truth.shape:
        raise ShapeError("masks must have equal shapes")
    tp = int(np.count_nonzero(mask & truth))
    fp = int(np.count_nonzero(mask & ~truth))
    fn = int(np.count_nonzero(~mask & truth))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def moving_block_video(height=48, width=48, frames=20, block=12, intensity=0.9, seed=0):
    """Static low-rank background with a bright square sliding across it.

    Returns ``(video, truth)``: video of shape ``(height, width, frames)``
    with values in ``[0, 1]`` and the boolean planted foreground.
    """
    rng = _rng(seed)
    # smooth rank-2 background, scaled into [0.1, 0.5]
    u = rng.random((height, 2))
    v = rng.random((width, 2))
    bg = scipy.ndimage.gaussian_filter(u @ v.T, 3.0)
    bg = 0.1 + 0.4 * (bg - bg.min()) / max(bg.max() - bg.min(), 1e-12)
    video = np.repeat(bg[:, :, None], frames, axis=2)
    truth = np.zeros_like(video, dtype=bool)
    row0 = (height - block) // 2
    span = width - block
    for f in range(frames):
        col = int(round(f * span / max(frames - 1, 1)))
        r = row0 + int(round(0.25 * row0 * math.sin(2 * math.pi * f / frames)))
        truth[r : r + block, col : col + block, f] = True
    video[truth] = intensity
    return video, truth


def rgb_test_card(height=96, width=96):
    """Smooth synthetic colour image in ``[0, 1]``, shape ``(height, width, 3)``."""
    yy, xx = np.mgrid[0:height, 0:width] / max(height, width)
    r = 0.5 + 0.4 * np.sin(2 * np.pi * xx) * np.cos(np.pi * yy)
    g = 0.5 + 0.4 * np.cos(3 * np.pi * xx * yy)
    b = np.clip(0.2 + 0.6 * xx * (1 - yy), 0, 1)
    return np.clip(np.stack([r, g, b], axis=2), 0, 1)
