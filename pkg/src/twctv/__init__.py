"""Robust low-rank tensor completion with weighted correlated total variation."""

from .admm import (
    DivergenceError,
    IterationRecord,
    Mode,
    RecoveryResult,
    SolverConfig,
    SolverState,
    admm_iteration,
    convergence_check,
    default_axes,
    default_lambda,
    rlrtc_solve,
)
from .gradient import build_spectrum_cache, grad, grad_adjoint, solve_x_subproblem
from .shrinkage import (
    compute_sv_weights,
    gst,
    gst_scalar,
    gst_threshold,
    gtsvt,
    soft_threshold_weighted,
    sparse_weights,
)
from .tensor import frobenius_norm, l1_norm, linf_norm, mode_k_product, project
from .transforms import (
    Family,
    TransformSpec,
    apply_transform,
    build_transform,
    inverse_transform,
    m_product,
    m_svd,
    m_transpose,
    tubal_rank,
    tv_norm,
    twctv_norm,
    weighted_schatten_p_norm,
)

__version__ = "0.1.0"
