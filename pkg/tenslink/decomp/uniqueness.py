"""Kruskal rank, the sufficient CP uniqueness condition and model-to-model matching."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from ..core.errors import ValidationError
from ..twoway.factorization import FactorMatch, abs_cosines, greedy_assignment
from .models import KruskalTensor


KRUSKAL_MAX_COLUMNS = 8
RANK_TOL = 1e-10


def kruskal_rank(b: np.ndarray) -> int:
    """Largest k with every k-subset of columns linearly independent.

    Exhaustive over column subsets, so only matrices with at most
    ``KRUSKAL_MAX_COLUMNS`` columns are accepted.
    """
    mat = np.atleast_2d(np.asarray(b, dtype=np.float64))
    r = mat.shape[1]
    if r > KRUSKAL_MAX_COLUMNS:
        raise ValidationError(f"kruskal_rank is exhaustive; {r} columns exceeds the limit of {KRUSKAL_MAX_COLUMNS}")
    if mat.size == 0:
        return 0
    tol = RANK_TOL * float(np.linalg.svd(mat, compute_uv=False)[0])
    if tol == 0:
        return 0
    best = 0
    for k in range(1, min(r, mat.shape[0]) + 1):
        for cols in itertools.combinations(range(r), k):
            s = np.linalg.svd(mat[:, cols], compute_uv=False)
            if int(np.sum(s > tol)) < k:
                return best
        best = k
    return best


@dataclass(frozen=True)
class UniquenessReport:
    kruskal_ranks: Tuple[int, ...]
    kruskal_sum: int
    threshold: int
    satisfied: bool


def cp_uniqueness_check(factors: Union[KruskalTensor, Sequence[np.ndarray]]) -> UniquenessReport:
    """Check Σκ_n ≥ 2R + (N−1). A rank-one model with nonzero factors always counts as unique."""
    mats = list(factors.factors) if isinstance(factors, KruskalTensor) else [np.atleast_2d(f) for f in factors]
    if not mats:
        raise ValidationError("cp_uniqueness_check needs at least one factor")
    r = mats[0].shape[1]
    if any(m.shape[1] != r for m in mats):
        raise ValidationError("factors have inconsistent column counts")
    ranks = tuple(kruskal_rank(m) for m in mats)
    total = sum(ranks)
    threshold = 2 * r + len(mats) - 1
    satisfied = total >= threshold or (r == 1 and all(k == 1 for k in ranks))
    return UniquenessReport(kruskal_ranks=ranks, kruskal_sum=total, threshold=threshold, satisfied=satisfied)


def congruence_match(est: KruskalTensor, truth: KruskalTensor) -> FactorMatch:
    """Greedy matching on the product over modes of |cos| between component columns."""
    if est.shape != truth.shape or est.rank != truth.rank:
        raise ValidationError(
            f"cannot match a rank-{est.rank} {est.shape} model against a rank-{truth.rank} {truth.shape} model"
        )
    score = np.ones((est.rank, truth.rank))
    for fe, ft in zip(est.factors, truth.factors):
        score *= abs_cosines(fe, ft)
    perm = greedy_assignment(score)
    scales = []
    for i, j in enumerate(perm):
        sign = np.prod([np.sign(fe[:, i] @ ft[:, j]) or 1.0 for fe, ft in zip(est.factors, truth.factors)])
        tw = truth.weights[j]
        scales.append(float(sign * est.weights[i] / tw) if tw else 0.0)
    return FactorMatch(
        permutation=tuple(perm),
        scales=tuple(scales),
        congruences=tuple(float(score[i, j]) for i, j in enumerate(perm)),
    )
