"""Canonical correlation for two sets (CCA) and many sets (MAXVAR MCCA).

Blocks are variables × samples matrices that share the sample count T.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array, canonical_signs


logger = logging.getLogger(__name__)

RANK_TOL = 1e-10
WHITEN_RIDGE = 1e-10


@dataclass(frozen=True)
class CCAResult:
    correlations: np.ndarray
    x_weights: np.ndarray
    y_weights: np.ndarray
    x_scores: np.ndarray
    y_scores: np.ndarray


def _center(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=1, keepdims=True)


def _row_space(xc: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    u, s, vt = np.linalg.svd(xc, full_matrices=False)
    keep = s > RANK_TOL * (s[0] if s.size else 0.0)
    if not np.any(keep):
        raise ValidationError("a block has zero variance")
    return u[:, keep], s[keep], vt[keep].T


def cca(x: ArrayLike, y: ArrayLike, n_components: Optional[int] = None) -> CCAResult:
    """Classical CCA from the SVD of the product of the two orthonormal sample-space bases."""
    xm, ym = np.atleast_2d(as_array(x)), np.atleast_2d(as_array(y))
    if xm.shape[1] != ym.shape[1]:
        raise ValidationError(f"cca needs equal sample counts, got {xm.shape[1]} and {ym.shape[1]}")
    ux, sx, vx = _row_space(_center(xm))
    uy, sy, vy = _row_space(_center(ym))
    p, rho, qt = np.linalg.svd(vx.T @ vy, full_matrices=False)
    c = min(n_components or rho.size, rho.size)
    p, q = p[:, :c], qt[:c].T
    x_scores, y_scores = vx @ p, vy @ q
    signs = canonical_signs(x_scores)
    return CCAResult(
        correlations=np.clip(rho[:c], 0.0, 1.0),
        x_weights=(ux / sx) @ p * signs,
        y_weights=(uy / sy) @ q * signs,
        x_scores=x_scores * signs,
        y_scores=y_scores * signs,
    )


@dataclass(frozen=True)
class MCCAResult:
    """Shared canonical scores (T×c), per-block weights (I_k×c) and per-block variates (T×c)."""

    common_scores: np.ndarray
    block_weights: Tuple[np.ndarray, ...]
    block_scores: Tuple[np.ndarray, ...]
    eigenvalues: np.ndarray
    correlations: np.ndarray
    means: Tuple[np.ndarray, ...]
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def transform(self, k: int, block: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(block) - self.means[k][:, None]).T @ self.block_weights[k]


def _whiten(xc: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Matrix W with W·xc having orthonormal rows; ridge on singular covariances."""
    evals, evecs = np.linalg.eigh(xc @ xc.T)
    top = max(float(evals[-1]), 0.0)
    if top == 0.0:
        raise ValidationError("a block has zero variance")
    ridged = bool(evals[0] <= WHITEN_RIDGE * top)
    if ridged:
        evals = np.maximum(evals, 0.0) + WHITEN_RIDGE * top
    return (evecs / np.sqrt(evals)) @ evecs.T, ridged


def mcca_maxvar(blocks: Sequence[ArrayLike], c: int = 1) -> MCCAResult:
    """MAXVAR multiset CCA.

    The shared scores are the leading right singular vectors of the stacked
    whitened blocks. Extracting components one at a time, each maximizing the
    summed squared correlation with the blocks and orthogonal to the earlier
    scores, yields the same vectors: after deflating the first j scores the
    leading singular vector of the stack is its (j+1)-th one. A single SVD
    therefore replaces the deflation loop. Each block's variate is the
    normalized projection of the shared score onto that block's sample space.
    """
    mats = [np.atleast_2d(as_array(b)) for b in blocks]
    if len(mats) < 2:
        raise ValidationError("mcca_maxvar needs at least two blocks")
    if len({m.shape[1] for m in mats}) != 1:
        raise ValidationError("blocks must share the sample count")
    if not 1 <= c <= min(m.shape[0] for m in mats):
        raise ValidationError(f"component count {c} outside [1, {min(m.shape[0] for m in mats)}]")
    means = tuple(m.mean(axis=1) for m in mats)
    centered = [_center(m) for m in mats]
    whiteners, ridged = [], []
    for k, xc in enumerate(centered):
        w, r = _whiten(xc)
        whiteners.append(w)
        ridged.append(r)
        if r:
            logger.warning("block %d covariance is singular; whitening with ridge %.0e", k, WHITEN_RIDGE)
    white = [w @ xc for w, xc in zip(whiteners, centered)]
    _, sv, vt = np.linalg.svd(np.vstack(white), full_matrices=False)
    common = vt[:c].T
    common = common * canonical_signs(common)

    block_weights, block_scores = [], []
    for w, z in zip(whiteners, white):
        coef = z @ common
        norms = np.linalg.norm(coef, axis=0)
        norms[norms == 0] = 1.0
        coef = coef / norms
        block_scores.append(z.T @ coef)
        block_weights.append(w.T @ coef)

    k = len(mats)
    corr = np.zeros(c)
    for j in range(c):
        pairs = [float(block_scores[a][:, j] @ block_scores[b][:, j]) for a in range(k) for b in range(a + 1, k)]
        corr[j] = float(np.mean(pairs))
    logger.info("mcca_maxvar: %d blocks, %d components, leading correlation %.6f", k, c, corr[0])
    return MCCAResult(
        common_scores=common,
        block_weights=tuple(block_weights),
        block_scores=tuple(block_scores),
        eigenvalues=sv[:c] ** 2,
        correlations=corr,
        means=means,
        metadata={"ridged_blocks": tuple(i for i, r in enumerate(ridged) if r)},
    )
