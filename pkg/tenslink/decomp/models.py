"""CP (Kruskal) and Tucker model containers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import canonical_signs, fold, khatri_rao_chain, multi_mode_product


# Allowed deviation of a weighted column norm from one.
UNIT_TOL = 1e-8


@dataclass(frozen=True)
class KruskalTensor:
    """Sum of R rank-one terms: nonnegative descending weights, unit-norm columns."""

    weights: np.ndarray
    factors: Tuple[np.ndarray, ...]
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        factors = tuple(np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in self.factors)
        if not factors:
            raise ValidationError("a Kruskal tensor needs at least one factor")
        for n, f in enumerate(factors, start=1):
            if f.shape[1] != weights.size:
                raise ValidationError(f"factor {n} has {f.shape[1]} columns, expected {weights.size}")
        if np.any(weights < 0) or np.any(np.diff(weights) > 0):
            raise ValidationError(f"Kruskal weights must be nonnegative and descending, got {weights}")
        for n, f in enumerate(factors, start=1):
            norms = np.linalg.norm(f[:, weights > 0], axis=0)
            if np.any(np.abs(norms - 1.0) > UNIT_TOL):
                raise ValidationError(f"factor {n} has non-unit columns (norms {norms}); use KruskalTensor.from_factors")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "factors", factors)

    @property
    def rank(self) -> int:
        return int(self.weights.size)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    @classmethod
    def from_factors(cls, factors: Sequence[np.ndarray], metadata: Dict[str, Any] | None = None) -> "KruskalTensor":
        """Normalize raw factors: unit columns, norms absorbed into the weights,
        signs canonical on every mode but the last, weights sorted descending."""
        mats = [np.array(f, dtype=np.float64, copy=True) for f in factors]
        r = mats[0].shape[1]
        weights = np.ones(r)
        for f in mats:
            norms = np.linalg.norm(f, axis=0)
            weights *= norms
            safe = np.where(norms > 0, norms, 1.0)
            f /= safe
        for f in mats[:-1]:
            signs = canonical_signs(f)
            f *= signs
            mats[-1] *= signs
        order = sorted(range(r), key=lambda j: (-weights[j], tuple(mats[0][:, j])))
        return cls(
            weights=weights[order],
            factors=tuple(f[:, order] for f in mats),
            metadata=dict(metadata or {}),
        )

    def full(self) -> np.ndarray:
        return reconstruct_kruskal(self)


@dataclass(frozen=True)
class TuckerTensor:
    """Core tensor multiplied by one factor matrix per mode."""

    core: np.ndarray
    factors: Tuple[np.ndarray, ...]
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        core = np.asarray(self.core, dtype=np.float64)
        factors = tuple(np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in self.factors)
        if core.ndim < len(factors):
            core = core.reshape(core.shape + (1,) * (len(factors) - core.ndim))
        if core.ndim != len(factors):
            raise ValidationError(f"core of order {core.ndim} needs {core.ndim} factors, got {len(factors)}")
        for n, f in enumerate(factors, start=1):
            if f.shape[1] != core.shape[n - 1]:
                raise ValidationError(
                    f"factor {n} has {f.shape[1]} columns but the core mode size is {core.shape[n - 1]}"
                )
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", factors)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return tuple(self.core.shape)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def full(self) -> np.ndarray:
        return reconstruct_tucker(self)


def full_from_factors(factors: Sequence[np.ndarray], weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Dense sum of rank-one terms from raw, unnormalized factors."""
    first = np.asarray(factors[0], dtype=np.float64)
    if weights is not None:
        first = first * weights
    if len(factors) == 1:
        return first.sum(axis=1)
    rest: List[np.ndarray] = [np.asarray(f, dtype=np.float64) for f in reversed(factors[1:])]
    shape = tuple(np.shape(f)[0] for f in factors)
    return fold(first @ khatri_rao_chain(rest).T, 1, shape)


def reconstruct_kruskal(k: KruskalTensor) -> np.ndarray:
    return full_from_factors(k.factors, k.weights)


def reconstruct_tucker(t: TuckerTensor) -> np.ndarray:
    return multi_mode_product(t.core, t.factors)
