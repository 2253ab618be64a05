"""HOSVD and HOOI (Tucker-ALS)."""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array, leading_left_singular_vectors, multi_mode_product, unfold
from .models import TuckerTensor


logger = logging.getLogger(__name__)

# Largest change of any factor's column-space projector that counts as converged.
HOOI_TOL = 1e-12
HOOI_MAX_ITER = 100


def _check_ranks(shape: Sequence[int], ranks: Sequence[int]) -> List[int]:
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(shape):
        raise ValidationError(f"{len(ranks)} ranks given for an order-{len(shape)} tensor")
    for n, (r, size) in enumerate(zip(ranks, shape), start=1):
        if not 1 <= r <= size:
            raise ValidationError(f"mode-{n} rank {r} outside [1, {size}]")
    return ranks


def mode_singular_values(x: ArrayLike) -> List[np.ndarray]:
    """Singular values of every unfolding, for choosing multilinear ranks by eye."""
    arr = as_array(x)
    return [np.linalg.svd(unfold(arr, n), compute_uv=False) for n in range(1, arr.ndim + 1)]


def hosvd(x: ArrayLike, ranks: Sequence[int]) -> TuckerTensor:
    arr = as_array(x)
    ranks = _check_ranks(arr.shape, ranks)
    factors = []
    discarded = 0.0
    for n, r in enumerate(ranks, start=1):
        u, s = leading_left_singular_vectors(unfold(arr, n), r)
        factors.append(u)
        discarded += float(np.sum(s[r:] ** 2))
    core = multi_mode_product(arr, factors, transpose=True)
    return TuckerTensor(core=core, factors=tuple(factors), metadata={"method": "hosvd", "truncation_bound": discarded})


def _fit(norm_x: float, core: np.ndarray) -> float:
    if norm_x == 0:
        return 1.0
    resid_sq = max(norm_x**2 - float(np.sum(core**2)), 0.0)
    return 1.0 - np.sqrt(resid_sq) / norm_x


def hooi(
    x: ArrayLike,
    ranks: Sequence[int],
    init: Optional[TuckerTensor] = None,
    *,
    tol: float = HOOI_TOL,
    max_iter: int = HOOI_MAX_ITER,
) -> TuckerTensor:
    """Higher-order orthogonal iteration, started from ``init`` (HOSVD by default).

    Sweeps stop once no factor's column space moves by more than ``tol``
    (Frobenius norm of the projector difference).
    """
    arr = as_array(x)
    ranks = _check_ranks(arr.shape, ranks)
    init = init or hosvd(arr, ranks)
    factors = [f.copy() for f in init.factors]
    norm_x = float(np.linalg.norm(arr))
    trace = [_fit(norm_x, init.core)]
    core = init.core
    change = np.inf
    for it in range(max_iter):
        prev = list(factors)
        for n in range(1, arr.ndim + 1):
            partial = multi_mode_product(arr, factors, skip=n, transpose=True)
            factors[n - 1], _ = leading_left_singular_vectors(unfold(partial, n), ranks[n - 1])
        core = multi_mode_product(arr, factors, transpose=True)
        trace.append(_fit(norm_x, core))
        change = max(float(np.linalg.norm(f @ f.T - p @ p.T)) for f, p in zip(factors, prev))
        logger.debug("hooi sweep %d fit %.12f subspace change %.3e", it + 1, trace[-1], change)
        if change <= tol:
            break
    logger.info("hooi finished after %d sweeps, fit %.10f", len(trace) - 1, trace[-1])
    return TuckerTensor(
        core=core,
        factors=tuple(factors),
        metadata={"method": "hooi", "fit_trace": trace, "subspace_change": change},
    )
