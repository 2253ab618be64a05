"""Common orthogonal basis extraction (COBE) and common/individual feature analysis (CIFA).

Matrix blocks are I_k×T (T = shared sample mode, second). Tensor blocks for
``cifa_tucker`` are T×I_{k,2}×I_{k,3} (shared mode first).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from ..config import settings
from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array, canonical_signs, leading_left_singular_vectors, multi_mode_product
from ..decomp.models import TuckerTensor
from ..decomp.tucker import hooi
from ..twoway import blind_identify, nmf


logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


def _range_basis(block: np.ndarray, rank: Optional[int]) -> np.ndarray:
    """Orthonormal T×R basis of the row space of an I×T block."""
    _, s, vt = np.linalg.svd(block, full_matrices=False)
    numerical = int(np.sum(s > RANK_TOL * (s[0] if s.size else 0.0)))
    r = numerical if rank is None else min(int(rank), numerical)
    return vt[:r].T


def _cobe_from_bases(bases: Sequence[np.ndarray], c: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sequential common-basis extraction with deflation; returns (T×c basis, per-stage residuals)."""
    bases = [q.copy() for q in bases]
    t = bases[0].shape[0]
    min_rank = min(q.shape[1] for q in bases)
    if c > min_rank:
        raise ValidationError(f"{c} common components requested but a block has rank {min_rank}")
    common = np.zeros((t, c))
    residuals = np.zeros(c)
    for j in range(c):
        u, s, _ = np.linalg.svd(np.hstack(bases), full_matrices=False)
        b = u[:, 0] - common[:, :j] @ (common[:, :j].T @ u[:, 0])
        b /= np.linalg.norm(b)
        b *= canonical_signs(b[:, None])[0]
        common[:, j] = b
        residuals[j] = len(bases) - s[0] ** 2
        deflated = []
        for q in bases:
            rest = q - np.outer(b, b @ q)
            keep = q.shape[1] - 1
            deflated.append(np.linalg.svd(rest, full_matrices=False)[0][:, :keep] if keep > 0 else rest[:, :0])
        bases = deflated
        logger.debug("cobe stage %d residual %.6e", j + 1, residuals[j])
    return common, residuals


def cobe(blocks: Sequence[ArrayLike], c: int, ranks: Optional[Sequence[int]] = None) -> np.ndarray:
    mats = [np.atleast_2d(as_array(b)) for b in blocks]
    if len({m.shape[1] for m in mats}) != 1:
        raise ValidationError("blocks must share the sample count")
    ranks = list(ranks) if ranks is not None else [None] * len(mats)
    common, _ = _cobe_from_bases([_range_basis(m, r) for m, r in zip(mats, ranks)], c)
    return common


def cobe_residual_curve(
    blocks: Sequence[ArrayLike], c_max: int, ranks: Optional[Sequence[int]] = None
) -> np.ndarray:
    """Residual K − σ₁² of each COBE stage up to ``c_max``; small values mean a truly shared direction."""
    mats = [np.atleast_2d(as_array(b)) for b in blocks]
    ranks = list(ranks) if ranks is not None else [None] * len(mats)
    _, residuals = _cobe_from_bases([_range_basis(m, r) for m, r in zip(mats, ranks)], c_max)
    return residuals


@dataclass(frozen=True)
class CifaModel:
    """Common basis B̄ shared by every block plus block-specific individual parts.

    Matrix case: X_k ≈ Ā_k B̄ᵀ + Ă_k B̆_kᵀ. Tensor case: X_k ≈ Ḡ_k ×₁ B̄ ×₂ B2_k ×₃ B3_k
    + Ğ_k ×₁ B̆_k ×₂ B2_k ×₃ B3_k, with ``common_parts`` holding Ḡ_k and
    ``individual_parts`` Ğ_k.
    """

    common_basis: np.ndarray
    individual_bases: Tuple[np.ndarray, ...]
    common_parts: Tuple[np.ndarray, ...]
    individual_parts: Tuple[np.ndarray, ...]
    side_factors: Tuple[Tuple[np.ndarray, ...], ...] = ()
    residuals: Tuple[float, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def n_common(self) -> int:
        return int(self.common_basis.shape[1])

    @property
    def n_blocks(self) -> int:
        return len(self.individual_bases)

    @property
    def is_tensor(self) -> bool:
        return bool(self.side_factors)

    def _block_shape(self, k: int) -> Tuple[int, ...]:
        return (self.common_basis.shape[0],) + tuple(f.shape[0] for f in self.side_factors[k])

    def common_component(self, k: int) -> np.ndarray:
        if self.is_tensor:
            if self.common_parts[k].size == 0:
                return np.zeros(self._block_shape(k))
            return multi_mode_product(self.common_parts[k], (self.common_basis,) + self.side_factors[k])
        return self.common_parts[k] @ self.common_basis.T

    def individual_component(self, k: int) -> np.ndarray:
        if self.is_tensor:
            if self.individual_parts[k].size == 0:
                return np.zeros(self._block_shape(k))
            return multi_mode_product(self.individual_parts[k], (self.individual_bases[k],) + self.side_factors[k])
        return self.individual_parts[k] @ self.individual_bases[k].T

    def reconstruct(self, k: int) -> np.ndarray:
        return self.common_component(k) + self.individual_component(k)


def _relative_residual(x: np.ndarray, approx: np.ndarray) -> float:
    nx = float(np.linalg.norm(x))
    return float(np.linalg.norm(x - approx)) / (nx or 1.0)


def _individual_split(
    resid: np.ndarray, rank: int, solver: str, seed: Optional[int]
) -> Tuple[np.ndarray, np.ndarray]:
    """Factor an I×T residual as Ă B̆ᵀ with the requested two-way solver."""
    if rank == 0:
        return np.zeros((resid.shape[0], 0)), np.zeros((resid.shape[1], 0))
    if solver == "pca":
        u, s, vt = np.linalg.svd(resid, full_matrices=False)
        signs = canonical_signs(vt[:rank].T)
        return u[:, :rank] * (s[:rank] * signs), vt[:rank].T * signs
    if solver == "nmf":
        fact = nmf(np.clip(resid, 0.0, None), rank, seed=seed)
        return fact.mixing, fact.sources
    if solver == "sobi":
        fact = blind_identify(resid, rank)
        return fact.mixing, fact.sources
    raise ValidationError(f"unknown subspace solver {solver!r}; choose pca, nmf or sobi")


def cifa_matrix(
    blocks: Sequence[ArrayLike],
    c: int,
    ranks: Union[int, Sequence[int]],
    *,
    solver: str = "pca",
    seed: Optional[int] = None,
) -> CifaModel:
    mats = [np.atleast_2d(as_array(b)) for b in blocks]
    if len({m.shape[1] for m in mats}) != 1:
        raise ValidationError("blocks must share the sample count")
    ranks = [int(ranks)] * len(mats) if np.isscalar(ranks) else [int(r) for r in ranks]
    if len(ranks) != len(mats):
        raise ValidationError(f"{len(ranks)} ranks given for {len(mats)} blocks")
    for k, (m, r) in enumerate(zip(mats, ranks)):
        if not 0 <= c <= r <= min(m.shape):
            raise ValidationError(f"block {k}: need 0 <= C={c} <= R={r} <= {min(m.shape)}")

    common, stage_residuals = _cobe_from_bases([_range_basis(m, r) for m, r in zip(mats, ranks)], c)
    common_parts, indiv_parts, indiv_bases, residuals = [], [], [], []
    for m, r in zip(mats, ranks):
        a_bar = m @ common
        a_ind, b_ind = _individual_split(m - a_bar @ common.T, r - c, solver, seed)
        common_parts.append(a_bar)
        indiv_parts.append(a_ind)
        indiv_bases.append(b_ind)
        residuals.append(_relative_residual(m, a_bar @ common.T + a_ind @ b_ind.T))
    logger.info("cifa_matrix: %d blocks, C=%d, residuals %s", len(mats), c, ", ".join(f"{v:.3g}" for v in residuals))
    return CifaModel(
        common_basis=common,
        individual_bases=tuple(indiv_bases),
        common_parts=tuple(common_parts),
        individual_parts=tuple(indiv_parts),
        residuals=tuple(residuals),
        metadata={"method": "cifa-matrix", "solver": solver, "cobe_residuals": stage_residuals},
    )


def cifa_tucker(
    blocks: Sequence[ArrayLike],
    c: int,
    ranks: Union[Sequence[int], Sequence[Sequence[int]]],
) -> CifaModel:
    """Linked Tucker model: per-block HOOI, then COBE on the mode-1 factors."""
    arrs = [as_array(b) for b in blocks]
    arrs = [a.reshape(a.shape + (1,) * (3 - a.ndim)) if a.ndim < 3 else a for a in arrs]
    if any(a.ndim != 3 for a in arrs):
        raise ValidationError("cifa_tucker needs third-order blocks")
    if len({a.shape[0] for a in arrs}) != 1:
        raise ValidationError(f"blocks disagree on the common mode-1 size: {[a.shape[0] for a in arrs]}")
    if np.ndim(ranks) == 1:
        ranks = [tuple(int(r) for r in ranks)] * len(arrs)
    ranks = [tuple(int(r) for r in rk) for rk in ranks]
    if len(ranks) != len(arrs):
        raise ValidationError(f"{len(ranks)} rank triples given for {len(arrs)} blocks")
    for k, rk in enumerate(ranks):
        if not 0 <= c <= rk[0]:
            raise ValidationError(f"block {k}: C={c} exceeds the mode-1 rank {rk[0]}")

    with ThreadPoolExecutor(max_workers=settings.threads) as pool:
        fits: List[TuckerTensor] = list(pool.map(lambda args: hooi(*args), zip(arrs, ranks)))

    common, stage_residuals = _cobe_from_bases([f.factors[0] for f in fits], c)
    proj = np.eye(common.shape[0]) - common @ common.T
    indiv_bases, common_cores, indiv_cores, sides, residuals, alignment = [], [], [], [], [], []
    for x, fit, rk in zip(arrs, fits, ranks):
        u = fit.factors[0]
        b_ind, _ = leading_left_singular_vectors(proj @ u, rk[0] - c)
        b1 = np.hstack([common, b_ind])
        rot, _ = scipy.linalg.orthogonal_procrustes(u, b1)
        alignment.append(float(np.linalg.norm(u @ rot - b1)))
        side = tuple(fit.factors[1:])
        core = multi_mode_product(x, (b1,) + side, transpose=True)
        common_cores.append(core[:c])
        indiv_cores.append(core[c:])
        indiv_bases.append(b_ind)
        sides.append(side)
        residuals.append(_relative_residual(x, multi_mode_product(core, (b1,) + side)))
    logger.info("cifa_tucker: %d blocks, C=%d, max alignment error %.3g", len(arrs), c, max(alignment))
    return CifaModel(
        common_basis=common,
        individual_bases=tuple(indiv_bases),
        common_parts=tuple(common_cores),
        individual_parts=tuple(indiv_cores),
        side_factors=tuple(sides),
        residuals=tuple(residuals),
        metadata={"method": "cifa-tucker", "cobe_residuals": stage_residuals, "alignment_errors": tuple(alignment)},
    )
