from __future__ import annotations

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array


def _pair(reference: ArrayLike, estimate: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    ref, est = as_array(reference), as_array(estimate)
    if ref.shape != est.shape:
        raise ValidationError(f"shape mismatch: {ref.shape} vs {est.shape}")
    return ref, est


def psnr(reference: ArrayLike, estimate: ArrayLike, peak: float) -> float:
    """10·log10(peak² / MSE) in dB; ``inf`` for identical inputs."""
    if peak <= 0:
        raise ValidationError(f"peak must be positive, got {peak}")
    ref, est = _pair(reference, estimate)
    mse = float(np.mean((ref - est) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))


def rrse(reference: ArrayLike, estimate: ArrayLike) -> float:
    """‖estimate − reference‖ / ‖reference‖."""
    ref, est = _pair(reference, estimate)
    denom = float(np.linalg.norm(ref))
    if denom == 0:
        raise ValidationError("rrse needs a nonzero reference")
    return float(np.linalg.norm(est - ref)) / denom
