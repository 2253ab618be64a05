"""Rank-constrained refits on a subset of matrix entries.

Convex solvers (nuclear norm, ℓ₁) shrink the answer they return. When the
entries they trust are exactly explained by a low-rank matrix, an unshrunk
alternating least-squares fit of that rank recovers it exactly.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)

REFIT_TOL = 1e-12
REFIT_MAX_ITER = 1000
REFIT_STALL = 1e-4


def refit_feasible(mask: np.ndarray, k: int) -> bool:
    """Every row and column observed at least ``k`` times and twice the rank-k degrees of freedom overall."""
    m, n = mask.shape
    if k < 1 or k > min(m, n):
        return False
    if int(mask.sum(axis=1).min()) < k or int(mask.sum(axis=0).min()) < k:
        return False
    return int(mask.sum()) >= 2 * k * (m + n - k)


def masked_rank_fit(
    values: np.ndarray,
    mask: np.ndarray,
    k: int,
    init: Optional[np.ndarray] = None,
    *,
    tol: float = REFIT_TOL,
    max_iter: int = REFIT_MAX_ITER,
) -> Optional[np.ndarray]:
    """Rank-``k`` matrix matching ``values`` on ``mask`` to relative accuracy ``tol``.

    Alternates row and column least squares starting from the leading right
    singular vectors of ``init``. Returns None when the entries are not
    explained to ``tol`` or the mask cannot pin down a rank-``k`` matrix.
    """
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not refit_feasible(mask, k):
        return None
    ref = float(np.linalg.norm(values[mask]))
    if ref == 0:
        return np.zeros_like(values)
    start = np.where(mask, values, 0.0) if init is None else np.asarray(init, dtype=np.float64)
    _, _, vt = np.linalg.svd(start, full_matrices=False)
    right = vt[:k].T.copy()
    left = np.zeros((values.shape[0], k))
    prev = resid = np.inf
    for it in range(max_iter):
        for i in range(values.shape[0]):
            seen = mask[i]
            left[i] = np.linalg.lstsq(right[seen], values[i, seen], rcond=None)[0]
        for j in range(values.shape[1]):
            seen = mask[:, j]
            right[j] = np.linalg.lstsq(left[seen], values[seen, j], rcond=None)[0]
        fit = left @ right.T
        resid = float(np.linalg.norm((values - fit)[mask])) / ref
        if resid < tol:
            logger.debug("rank-%d refit exact after %d sweeps", k, it + 1)
            return fit
        if it >= 5 and resid > prev * (1.0 - REFIT_STALL):
            break
        prev = resid
    logger.debug("rank-%d refit stopped at residual %.3e", k, resid)
    return None


def lowest_rank_fit(
    values: np.ndarray, mask: np.ndarray, init: np.ndarray, max_rank: int
) -> Optional[Tuple[np.ndarray, int]]:
    """First rank in 1..``max_rank`` whose refit explains the masked entries exactly."""
    for k in range(1, max_rank + 1):
        fit = masked_rank_fit(values, mask, k, init=init)
        if fit is not None:
            return fit, k
    return None
