from __future__ import annotations

import logging

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import canonical_signs
from .factorization import TwoWayFactorization


logger = logging.getLogger(__name__)


def pca(x: np.ndarray, r: int) -> TwoWayFactorization:
    """Truncated SVD: orthonormal A (variance-ordered, sign-canonical), B = V·S."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not 1 <= r <= min(x.shape):
        raise ValidationError(f"pca rank {r} outside [1, {min(x.shape)}]")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    signs = canonical_signs(u[:, :r])
    mixing = u[:, :r] * signs
    sources = vt[:r].T * (s[:r] * signs)
    residual = float(np.sum(s[r:] ** 2))
    logger.debug("pca rank %d keeps %.6f of the energy", r, 1.0 - residual / max(float(np.sum(s**2)), 1e-300))
    return TwoWayFactorization(
        mixing=mixing,
        sources=sources,
        method="pca",
        objective_trace=(residual,),
        metadata={"singular_values": s, "explained_variance": s[:r] ** 2},
    )
