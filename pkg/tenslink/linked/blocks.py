"""Multi-block arrangements: vertical concatenation, joint BSS, tensor ICA structure and PVD."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array, khatri_rao, leading_left_singular_vectors
from ..decomp.cp import cp_als
from ..decomp.models import KruskalTensor
from ..twoway import TwoWayFactorization, blind_identify, nmf, pca, smca


logger = logging.getLogger(__name__)

IndexMap = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class MultiBlockSet:
    """K ≥ 2 blocks sharing the size of one (1-based) common mode."""

    blocks: Tuple[np.ndarray, ...]
    common_mode: int = 1

    def __post_init__(self) -> None:
        blocks = tuple(as_array(b) for b in self.blocks)
        if len(blocks) < 2:
            raise ValidationError(f"a multi-block set needs at least 2 blocks, got {len(blocks)}")
        sizes = []
        for k, b in enumerate(blocks):
            if not 1 <= self.common_mode <= b.ndim:
                raise ValidationError(f"block {k} has no mode {self.common_mode}")
            sizes.append(b.shape[self.common_mode - 1])
        if len(set(sizes)) != 1:
            raise ValidationError(f"blocks disagree on the common-mode size: {sizes}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def common_size(self) -> int:
        return self.blocks[0].shape[self.common_mode - 1]


def _as_matrices(blocks: Sequence[ArrayLike]) -> Tuple[np.ndarray, ...]:
    mats = tuple(np.atleast_2d(as_array(b)) for b in blocks)
    if not mats:
        raise ValidationError("at least one block is required")
    if any(m.ndim != 2 for m in mats):
        raise ValidationError("blocks must be matrices")
    widths = {m.shape[1] for m in mats}
    if len(widths) != 1:
        raise ValidationError(f"blocks must share the column (sample) count, got {sorted(widths)}")
    return mats


def concat_vertical(blocks: Sequence[ArrayLike]) -> Tuple[np.ndarray, IndexMap]:
    mats = _as_matrices(blocks)
    bounds = np.cumsum([0] + [m.shape[0] for m in mats])
    index_map = tuple((int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))
    return np.vstack(mats), index_map


def split_vertical(tall: np.ndarray, index_map: IndexMap) -> Tuple[np.ndarray, ...]:
    tall = np.atleast_2d(np.asarray(tall))
    if index_map and index_map[-1][1] != tall.shape[0]:
        raise ValidationError(f"index map covers {index_map[-1][1]} rows but the matrix has {tall.shape[0]}")
    return tuple(tall[a:b] for a, b in index_map)


SOLVERS: Dict[str, Callable[..., TwoWayFactorization]] = {
    "pca": pca,
    "nmf": nmf,
    "smca": smca,
    "sobi": blind_identify,
}


@dataclass(frozen=True)
class JointBSSResult:
    sources: np.ndarray
    mixings: Tuple[np.ndarray, ...]
    factorization: TwoWayFactorization


def joint_bss(blocks: Sequence[ArrayLike], r: int, method: str = "pca", **options: Any) -> JointBSSResult:
    """Factor the stacked blocks with one two-way solver; B is shared, A splits per block."""
    if method not in SOLVERS:
        raise ValidationError(f"unknown two-way solver {method!r}; choose from {sorted(SOLVERS)}")
    tall, index_map = concat_vertical(blocks)
    fact = SOLVERS[method](tall, r, **options)
    logger.info("joint_bss: %d blocks, %d rows, solver %s", len(index_map), tall.shape[0], method)
    return JointBSSResult(sources=fact.sources, mixings=split_vertical(fact.mixing, index_map), factorization=fact)


@dataclass(frozen=True)
class TensorICAResult:
    """Slice k of the data is ``mixing @ diag(weights[k]) @ sources.T``."""

    mixing: np.ndarray
    sources: np.ndarray
    weights: np.ndarray
    model: KruskalTensor

    def slice(self, k: int) -> np.ndarray:
        return (self.mixing * self.weights[k]) @ self.sources.T


def tensor_ica_fit(x: ArrayLike, r: int, **options: Any) -> TensorICAResult:
    """CP structure of an I×T×K stack; the CP weights are folded into the subject mode."""
    arr = as_array(x)
    if arr.ndim != 3:
        raise ValidationError(f"tensor_ica_fit needs an I×T×K tensor, got order {arr.ndim}")
    model = cp_als(arr, r, **options)
    a, b, w = model.factors
    return TensorICAResult(mixing=a, sources=b, weights=w * model.weights, model=model)


def tensor_ica_unfolding(result: TensorICAResult) -> np.ndarray:
    """(W ⊙ A) Bᵀ, the transposed mode-2 unfolding of the modelled stack."""
    return khatri_rao(result.weights, result.mixing) @ result.sources.T


@dataclass(frozen=True)
class PVDResult:
    row_basis: np.ndarray
    column_basis: np.ndarray
    cores: Tuple[np.ndarray, ...]
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def reconstruct(self, k: int) -> np.ndarray:
        return self.row_basis @ self.cores[k] @ self.column_basis.T


def pvd(blocks: Sequence[ArrayLike], ranks: Tuple[int, int]) -> PVDResult:
    """Population value decomposition X_k ≈ A G_k Bᵀ with shared orthonormal A and B."""
    mats = tuple(np.atleast_2d(as_array(b)) for b in blocks)
    if not mats:
        raise ValidationError("pvd needs at least one block")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise ValidationError("pvd needs blocks of identical shape")
    ra, rb = (int(v) for v in ranks)
    if not (1 <= ra <= shape[0] and 1 <= rb <= shape[1]):
        raise ValidationError(f"pvd ranks {ranks} exceed the block shape {shape}")
    # eigenvectors of Σ X_k X_kᵀ and Σ X_kᵀ X_k
    a, sa = leading_left_singular_vectors(np.hstack(mats), ra)
    b, sb = leading_left_singular_vectors(np.hstack([m.T for m in mats]), rb)
    cores = tuple(a.T @ m @ b for m in mats)
    return PVDResult(row_basis=a, column_basis=b, cores=cores, metadata={"row_spectrum": sa**2, "column_spectrum": sb**2})
