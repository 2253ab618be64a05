"""Volume denoising by grouping similar cubes and low-rank filtering each group.

For every reference cube on a strided grid, the most similar cubes in a local
search window are stacked into a p×p×p×K_g array, filtered, and written back.
Overlapping estimates are averaged voxel-wise.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..config import settings
from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array, multi_mode_product, unfold
from .models import MaskedTensor
from .rank_adapt import cp_rank_adapt


logger = logging.getLogger(__name__)

SEARCH_RADIUS = 5
MAD_SCALE = 1.4826


def estimate_noise_sigma(volume: ArrayLike) -> float:
    """Robust Gaussian noise level from the MAD of first differences along mode 1."""
    d = np.diff(as_array(volume), axis=0).ravel()
    if d.size == 0:
        return 0.0
    return float(MAD_SCALE * np.median(np.abs(d - np.median(d))) / np.sqrt(2.0))


def _grid(size: int, patch: int, stride: int) -> List[int]:
    pos = list(range(0, size - patch + 1, stride))
    if pos[-1] != size - patch:
        pos.append(size - patch)
    return pos


def hosvd_hard_threshold(stack: np.ndarray, sigma: float) -> np.ndarray:
    """Full HOSVD of the group; core coefficients below σ·√(2 log #coeffs) are zeroed."""
    factors = [np.linalg.svd(unfold(stack, n), full_matrices=False)[0] for n in range(1, stack.ndim + 1)]
    core = multi_mode_product(stack, factors, transpose=True)
    tau = sigma * np.sqrt(2.0 * np.log(max(core.size, 2)))
    core = np.where(np.abs(core) >= tau, core, 0.0)
    return multi_mode_product(core, factors)


def _rank_adapt_filter(stack: np.ndarray, rank: int, seed: Optional[int]) -> np.ndarray:
    _, decomposition = cp_rank_adapt(MaskedTensor.fully_observed(stack), rank, seed=seed, robust=False, max_iter=50)
    return decomposition.lowrank


def patch_denoise(
    volume: ArrayLike,
    patch: int = 4,
    group: int = 8,
    method: Literal["hosvd", "cp_rank_adapt"] = "hosvd",
    *,
    stride: Optional[int] = None,
    search: int = SEARCH_RADIUS,
    sigma: Optional[float] = None,
    rank: int = 4,
    seed: Optional[int] = None,
) -> np.ndarray:
    vol = as_array(volume)
    if vol.ndim != 3:
        raise ValidationError(f"patch_denoise needs a third-order volume, got order {vol.ndim}")
    if patch < 1 or any(s < patch for s in vol.shape):
        raise ValidationError(f"patch size {patch} does not fit in a volume of shape {vol.shape}")
    if group < 1:
        raise ValidationError("group size must be at least 1")
    if method not in ("hosvd", "cp_rank_adapt"):
        raise ValidationError(f"unknown group filter {method!r}")
    stride = stride or max(1, patch // 2)
    sigma = estimate_noise_sigma(vol) if sigma is None else float(sigma)
    windows = sliding_window_view(vol, (patch,) * 3)
    refs = [
        (i, j, k)
        for i in _grid(vol.shape[0], patch, stride)
        for j in _grid(vol.shape[1], patch, stride)
        for k in _grid(vol.shape[2], patch, stride)
    ]

    def work(chunk: Sequence[Tuple[int, int, int]]) -> Tuple[np.ndarray, np.ndarray]:
        acc = np.zeros_like(vol)
        cnt = np.zeros_like(vol)
        for ref in chunk:
            lo = [max(0, c - search) for c in ref]
            hi = [min(windows.shape[d], ref[d] + search + 1) for d in range(3)]
            cand = windows[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]]
            flat = cand.reshape(-1, patch**3)
            target = windows[ref].reshape(-1)
            dist = np.sum((flat - target) ** 2, axis=1)
            # the reference cube always leads its own group
            dist[np.ravel_multi_index(tuple(c - l for c, l in zip(ref, lo)), cand.shape[:3])] = -1.0
            order = np.argsort(dist, kind="stable")[: min(group, dist.size)]
            coords = np.array(np.unravel_index(order, cand.shape[:3])).T + lo
            stack = np.stack([windows[tuple(c)] for c in coords], axis=-1)
            if method == "hosvd":
                est = hosvd_hard_threshold(stack, sigma)
            else:
                est = _rank_adapt_filter(stack, min(rank, stack.shape[-1]), seed)
            for g, (a, b, c) in enumerate(coords):
                acc[a : a + patch, b : b + patch, c : c + patch] += est[..., g]
                cnt[a : a + patch, b : b + patch, c : c + patch] += 1.0
        return acc, cnt

    n_parts = max(1, min(settings.threads, len(refs)))
    chunks = [refs[p::n_parts] for p in range(n_parts)]
    with ThreadPoolExecutor(max_workers=n_parts) as pool:
        parts = list(pool.map(work, chunks))
    acc = sum(p[0] for p in parts)
    cnt = sum(p[1] for p in parts)
    logger.info("patch_denoise: %d reference cubes, patch %d, group %d, sigma %.4g", len(refs), patch, group, sigma)
    return acc / cnt
