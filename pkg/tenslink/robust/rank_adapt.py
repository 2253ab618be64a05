"""Robust CP with automatic rank selection.

Model: Y = X + E + N on the observed entries, X low CP-rank, E sparse outliers,
N Gaussian noise. The inner loop alternates an EM-imputed ALS sweep with
entrywise soft-thresholding of the residual into E, dropping components whose
weight collapses. The outer loop removes the weakest component while the fit
on inlier entries degrades by no more than the noise level explains.
"""
from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np

from ..core.errors import ConvergenceError, ValidationError
from ..decomp.cp import solve_normal_equations, gram_hadamard, init_factors, mttkrp
from ..decomp.models import KruskalTensor, full_from_factors
from .models import MaskedTensor, RobustDecomposition
from .rpca import shrink


logger = logging.getLogger(__name__)

PRUNE_EPS = 1e-3
OUTLIER_MAD_FACTOR = 3.0
ACCEPT_NOISE_FACTOR = 4.0
ACCEPT_FLOOR = 1e-3
INNER_TOL = 1e-9
INNER_MAX_ITER = 300
MAD_SCALE = 1.4826


def _full(factors: List[np.ndarray]) -> np.ndarray:
    return full_from_factors(factors)


def _weights(factors: List[np.ndarray]) -> np.ndarray:
    w = np.ones(factors[0].shape[1])
    for f in factors:
        w *= np.linalg.norm(f, axis=0)
    return w


def _balance(factors: List[np.ndarray]) -> None:
    w = _weights(factors) ** (1.0 / len(factors))
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        norms[norms == 0] = 1.0
        f *= w / norms


def _outlier_threshold(resid: np.ndarray, rms: float) -> float:
    med = float(np.median(resid))
    mad = MAD_SCALE * float(np.median(np.abs(resid - med)))
    return max(OUTLIER_MAD_FACTOR * mad, 1e-3 * rms)


def _inner_fit(
    y: MaskedTensor, factors: List[np.ndarray], robust: bool, max_iter: int
) -> Tuple[List[np.ndarray], np.ndarray, np.ndarray]:
    obs = y.mask
    rms = float(np.sqrt(np.mean(y.values[obs] ** 2))) or 1.0
    sparse = np.zeros(y.shape)
    approx = _full(factors)
    for it in range(max_iter):
        data = np.where(obs, y.values - sparse, approx)
        for n in range(1, len(factors) + 1):
            factors[n - 1], _ = solve_normal_equations(gram_hadamard(factors, n), mttkrp(data, factors, n))
        _balance(factors)
        w = _weights(factors)
        if w.max() == 0:
            raise ConvergenceError("every CP component collapsed to zero")
        keep = w >= PRUNE_EPS * w.max()
        if not keep.all():
            logger.debug("pruning %d weak components", int((~keep).sum()))
            factors = [f[:, keep] for f in factors]
        new = _full(factors)
        if robust:
            resid = np.where(obs, y.values - new, 0.0)
            sparse = np.where(obs, shrink(resid, _outlier_threshold(resid[obs], rms)), 0.0)
        change = float(np.linalg.norm(new - approx)) / max(float(np.linalg.norm(new)), 1e-300)
        approx = new
        if change < INNER_TOL:
            break
    return factors, approx, sparse


def _inlier_sse(y: MaskedTensor, approx: np.ndarray, sparse: np.ndarray) -> Tuple[float, int]:
    inliers = y.mask & (sparse == 0)
    return float(np.sum((y.values - approx)[inliers] ** 2)), int(inliers.sum())


def _best_reduced_fit(
    y: MaskedTensor, factors: List[np.ndarray], drop: int, robust: bool, max_iter: int, seed: Optional[int]
) -> Tuple[List[np.ndarray], np.ndarray, np.ndarray, float]:
    """Refit without component ``drop``, warm-started and from a fresh HOSVD start; keep the better."""
    rank = factors[0].shape[1] - 1
    starts = [
        [np.delete(f, drop, axis=1) for f in factors],
        init_factors(np.where(y.mask, y.values, 0.0), rank, "hosvd", seed),
    ]
    best = None
    for start in starts:
        fit = _inner_fit(y, start, robust, max_iter)
        sse, _ = _inlier_sse(y, fit[1], fit[2])
        if best is None or sse < best[3]:
            best = (*fit, sse)
    return best


def cp_rank_adapt(
    y: MaskedTensor,
    r_init: int,
    *,
    seed: Optional[int] = None,
    robust: bool = True,
    max_iter: int = INNER_MAX_ITER,
) -> Tuple[KruskalTensor, RobustDecomposition]:
    if r_init < 1:
        raise ValidationError(f"r_init must be at least 1, got {r_init}")
    y.require_observed()
    total = float(np.sum(y.values[y.mask] ** 2))
    if total == 0:
        raise ConvergenceError("all observed entries are zero; no component can be estimated")
    dof = float(sum(y.shape))
    start = init_factors(np.where(y.mask, y.values, 0.0), r_init, "hosvd", seed)
    factors, approx, sparse = _inner_fit(y, start, robust, max_iter)
    history = [factors[0].shape[1]]

    while factors[0].shape[1] > 1:
        sse, n_in = _inlier_sse(y, approx, sparse)
        sigma2 = sse / max(n_in, 1)
        weakest = int(np.argmin(_weights(factors)))
        t_factors, t_approx, t_sparse, t_sse = _best_reduced_fit(y, factors, weakest, robust, max_iter, seed)
        allowed = max(ACCEPT_NOISE_FACTOR * dof * sigma2, ACCEPT_FLOOR * total)
        logger.debug("rank %d -> %d: sse %.3e -> %.3e (allowed %.3e)", factors[0].shape[1], t_factors[0].shape[1], sse, t_sse, allowed)
        if t_sse - sse > allowed:
            break
        factors, approx, sparse = t_factors, t_approx, t_sparse
        history.append(factors[0].shape[1])

    sse, n_in = _inlier_sse(y, approx, sparse)
    noise = sse / max(n_in, 1)
    support = float(np.count_nonzero(sparse[y.mask])) / y.observed_count
    model = KruskalTensor.from_factors(
        factors, metadata={"method": "cp_rank_adapt", "rank_history": history, "r_init": r_init}
    )
    logger.info("cp_rank_adapt: rank %d -> %d, noise variance %.3e, outlier fraction %.4f", r_init, model.rank, noise, support)
    return model, RobustDecomposition(lowrank=approx, sparse=sparse, noise_variance=noise, support_fraction=support)
