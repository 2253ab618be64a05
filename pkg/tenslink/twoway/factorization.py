"""Result types shared by the two-way solvers, and column matching up to permutation and scale."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from ..core.errors import ValidationError


@dataclass(frozen=True)
class TwoWayFactorization:
    """X ≈ A Bᵀ with mixing A (I×R) and sources B (T×R)."""

    mixing: np.ndarray
    sources: np.ndarray
    method: str
    objective_trace: Tuple[float, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.mixing, dtype=np.float64))
        b = np.atleast_2d(np.asarray(self.sources, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise ValidationError(f"mixing has {a.shape[1]} columns but sources have {b.shape[1]}")
        object.__setattr__(self, "mixing", a)
        object.__setattr__(self, "sources", b)
        object.__setattr__(self, "objective_trace", tuple(float(v) for v in self.objective_trace))

    @property
    def rank(self) -> int:
        return int(self.mixing.shape[1])

    def reconstruct(self) -> np.ndarray:
        return self.mixing @ self.sources.T


@dataclass(frozen=True)
class FactorMatch:
    permutation: Tuple[int, ...]
    scales: Tuple[float, ...]
    congruences: Tuple[float, ...]

    @property
    def mean_congruence(self) -> float:
        return float(np.mean(self.congruences)) if self.congruences else 0.0


def abs_cosines(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """|cos| between every estimated column (rows) and every true column (columns)."""
    en = np.linalg.norm(est, axis=0)
    tn = np.linalg.norm(truth, axis=0)
    en[en == 0] = 1.0
    tn[tn == 0] = 1.0
    return np.abs((est / en).T @ (truth / tn))


def greedy_assignment(score: np.ndarray) -> List[int]:
    """Repeatedly pair the highest remaining score; returns est -> truth indices."""
    score = np.array(score, dtype=np.float64, copy=True)
    n_est, n_true = score.shape
    perm = [-1] * n_est
    for _ in range(min(n_est, n_true)):
        i, j = np.unravel_index(int(np.argmax(score)), score.shape)
        perm[i] = int(j)
        score[i, :] = -np.inf
        score[:, j] = -np.inf
    return perm


def column_congruence(est: np.ndarray, truth: np.ndarray) -> FactorMatch:
    """Match the columns of two same-shape matrices ignoring order, sign and scale."""
    est = np.atleast_2d(np.asarray(est, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if est.shape != truth.shape:
        raise ValidationError(f"cannot match {est.shape} columns against {truth.shape}")
    score = abs_cosines(est, truth)
    perm = greedy_assignment(score)
    scales = []
    for i, j in enumerate(perm):
        denom = float(truth[:, j] @ truth[:, j])
        scales.append(float(est[:, i] @ truth[:, j]) / denom if denom else 0.0)
    return FactorMatch(
        permutation=tuple(perm),
        scales=tuple(scales),
        congruences=tuple(float(score[i, j]) for i, j in enumerate(perm)),
    )
