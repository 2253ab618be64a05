from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple, Union

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, DenseTensor, ObservationMask, as_array


@dataclass(frozen=True)
class MaskedTensor:
    """Values paired with a same-shape observation mask; unobserved values are stored as 0."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        mask = self.mask.flags if isinstance(self.mask, ObservationMask) else np.asarray(self.mask, dtype=bool)
        values = np.array(as_array(self.values), dtype=np.float64, copy=True)
        if values.shape != mask.shape:
            raise ValidationError(f"values {values.shape} and mask {mask.shape} differ in shape")
        values[~mask] = 0.0
        values.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def fully_observed(cls, x: Union[ArrayLike, DenseTensor]) -> "MaskedTensor":
        arr = as_array(x)
        return cls(arr, np.ones(arr.shape, dtype=bool))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def observed_count(self) -> int:
        return int(self.mask.sum())

    @property
    def observed_fraction(self) -> float:
        return self.observed_count / self.mask.size

    def require_observed(self) -> None:
        if not self.mask.any():
            raise ValidationError("the observation mask is empty")

    def clamp(self, estimate: ArrayLike) -> np.ndarray:
        """Estimate with every observed entry replaced by its observed value."""
        return np.where(self.mask, self.values, as_array(estimate))


@dataclass(frozen=True)
class RobustDecomposition:
    """Observed ≈ lowrank + sparse + noise."""

    lowrank: np.ndarray
    sparse: np.ndarray
    noise_variance: float
    support_fraction: float
    converged: bool = True
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)
