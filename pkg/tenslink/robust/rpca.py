"""Robust PCA by the inexact augmented Lagrange multiplier method.

Solves min ‖X‖_* + λ‖E‖₁ subject to Y = X + E. When the entries the convex
solution leaves unflagged are exactly low rank, they are refit without
shrinkage and the outliers recomputed from that fit.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from ..core.errors import ValidationError
from .models import RobustDecomposition
from .refit import lowest_rank_fit


logger = logging.getLogger(__name__)

RPCA_TOL = 1e-7
RPCA_MAX_ITER = 1000
RHO = 1.5
# |E| below this fraction of max|Y| is not treated as an outlier.
OUTLIER_FLOOR = 1e-4


def shrink(x: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def svt(x: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
    """Singular value thresholding; returns the result and its rank."""
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.sum(s > 0))
    return (u[:, :k] * s[:k]) @ vt[:k], k


def inlier_refit(y: np.ndarray, lowrank: np.ndarray, sparse: np.ndarray, max_rank: int) -> Optional[tuple[np.ndarray, int]]:
    """Smallest-rank exact fit to the entries outside the detected outlier support."""
    inliers = np.abs(sparse) <= OUTLIER_FLOOR * float(np.abs(y).max())
    return lowest_rank_fit(y, inliers, lowrank, max_rank)


def rpca(
    y: np.ndarray,
    lam: Optional[float] = None,
    *,
    tol: float = RPCA_TOL,
    max_iter: int = RPCA_MAX_ITER,
    refit: bool = True,
) -> RobustDecomposition:
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if lam is None:
        lam = 1.0 / np.sqrt(max(y.shape))
    if lam <= 0:
        raise ValidationError(f"rpca needs lambda > 0, got {lam}")
    if max_iter < 0:
        raise ValidationError(f"rpca needs max_iter >= 0, got {max_iter}")
    norm_fro = float(np.linalg.norm(y))
    if norm_fro == 0:
        zero = np.zeros_like(y)
        return RobustDecomposition(lowrank=zero, sparse=zero.copy(), noise_variance=0.0, support_fraction=0.0)

    norm_two = float(np.linalg.norm(y, 2))
    dual = y / max(norm_two, float(np.abs(y).max()) / lam)
    mu = 1.25 / norm_two
    mu_bar = mu * 1e7
    sparse = np.zeros_like(y)
    lowrank = np.zeros_like(y)
    converged = False
    rank = 0
    it = 0
    err = 1.0
    while it < max_iter:
        it += 1
        lowrank, rank = svt(y - sparse + dual / mu, 1.0 / mu)
        sparse = shrink(y - lowrank + dual / mu, lam / mu)
        gap = y - lowrank - sparse
        dual = dual + mu * gap
        mu = min(mu * RHO, mu_bar)
        err = float(np.linalg.norm(gap)) / norm_fro
        logger.debug("rpca iter %d rank %d residual %.3e", it, rank, err)
        if err < tol:
            converged = True
            break
    if not converged:
        logger.warning("rpca did not converge in %d iterations (residual %.3e)", max_iter, err)

    refit_rank = None
    if refit and rank > 0:
        found = inlier_refit(y, lowrank, sparse, min(rank + 1, min(y.shape)))
        if found is not None:
            lowrank, refit_rank = found
            rank = refit_rank
            resid = y - lowrank
            sparse = np.where(np.abs(resid) > OUTLIER_FLOOR * float(np.abs(y).max()), resid, 0.0)
            logger.debug("rpca: inliers refit exactly at rank %d", refit_rank)
    logger.info("rpca: rank %d, %d outliers, %d iterations", rank, int(np.count_nonzero(sparse)), it)
    return RobustDecomposition(
        lowrank=lowrank,
        sparse=sparse,
        noise_variance=float(np.mean((y - lowrank - sparse) ** 2)),
        support_fraction=float(np.count_nonzero(sparse)) / sparse.size,
        converged=converged,
        metadata={"rank": rank, "iterations": it, "lambda": lam, "residual": err, "refit_rank": refit_rank},
    )
