"""Seeded synthetic data with known ground truth."""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ValidationError
from ..decomp.models import KruskalTensor, TuckerTensor
from ..robust.models import MaskedTensor


def planted_cp(
    shape: Sequence[int], rank: int, seed: int = 0, *, nonneg: bool = False, min_weight: float = 1.0
) -> KruskalTensor:
    """Random CP model with unit-norm columns and weights spread over [min_weight, 2·min_weight]."""
    if rank < 1:
        raise ValidationError("rank must be at least 1")
    rng = np.random.default_rng(seed)
    draw = rng.uniform if nonneg else rng.standard_normal
    factors = [draw(size=(int(s), rank)) for s in shape]
    weights = np.linspace(2.0, 1.0, rank) * min_weight if rank > 1 else np.array([min_weight])
    normed = [f / np.linalg.norm(f, axis=0) for f in factors]
    normed[0] = normed[0] * weights
    return KruskalTensor.from_factors(normed, metadata={"generator": "planted_cp", "seed": seed})


def planted_tucker(shape: Sequence[int], ranks: Sequence[int], seed: int = 0) -> TuckerTensor:
    rng = np.random.default_rng(seed)
    factors = [np.linalg.qr(rng.standard_normal((int(s), int(r))))[0] for s, r in zip(shape, ranks)]
    core = rng.standard_normal(tuple(int(r) for r in ranks))
    return TuckerTensor(core=core, factors=tuple(factors), metadata={"generator": "planted_tucker", "seed": seed})


def random_mask(shape: Sequence[int], missing: float, seed: int = 0) -> np.ndarray:
    """Boolean mask with exactly round((1 − missing)·size) observed entries (at least one)."""
    if not 0.0 <= missing < 1.0:
        raise ValidationError(f"missing ratio must lie in [0, 1), got {missing}")
    size = int(np.prod(shape))
    n_obs = max(1, int(round((1.0 - missing) * size)))
    rng = np.random.default_rng(seed)
    flat = np.zeros(size, dtype=bool)
    flat[rng.choice(size, size=n_obs, replace=False)] = True
    return flat.reshape(tuple(shape), order="F")


def masked(full: np.ndarray, missing: float, seed: int = 0) -> MaskedTensor:
    return MaskedTensor(full, random_mask(full.shape, missing, seed))


def add_noise(x: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return x + sigma * rng.standard_normal(x.shape)


def phantom(shape: Tuple[int, int, int] = (32, 32, 32), seed: int = 0) -> np.ndarray:
    """Piecewise-constant volume of nested ellipsoids with intensities in [0, 1] (peak 1)."""
    rng = np.random.default_rng(seed)
    grids = np.meshgrid(*[np.linspace(-1.0, 1.0, s) for s in shape], indexing="ij")
    vol = np.zeros(shape)

    def ellipsoid(center: np.ndarray, radii: np.ndarray) -> np.ndarray:
        return sum(((g - c) / r) ** 2 for g, c, r in zip(grids, center, radii)) <= 1.0

    vol[ellipsoid(np.zeros(3), np.array([0.85, 0.75, 0.8]))] = 0.4
    for value in (0.7, 1.0, 0.55):
        center = rng.uniform(-0.35, 0.35, size=3)
        radii = rng.uniform(0.15, 0.3, size=3)
        vol[ellipsoid(center, radii)] = value
    return vol


def pink_noise(n_channels: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Independent 1/f noise per channel, unit variance."""
    white = rng.standard_normal((n_channels, n_samples))
    spec = np.fft.rfft(white, axis=1)
    freqs = np.arange(spec.shape[1], dtype=np.float64)
    freqs[0] = np.inf
    noise = np.fft.irfft(spec / np.sqrt(freqs), n=n_samples, axis=1)
    return noise / noise.std(axis=1, keepdims=True)


HARMONIC_AMPLITUDES = (1.0, 0.5)


def synth_ssvep(
    frequencies: Sequence[float] = (6.0, 8.0, 9.0, 10.0),
    channels: int = 8,
    trials: int = 6,
    duration: float = 4.0,
    snr_db: Optional[float] = -10.0,
    seed: int = 0,
    fs: float = 250.0,
) -> List[np.ndarray]:
    """One channel × time × trial tensor per stimulus frequency.

    Each class is a single phase-locked source (fundamental plus second harmonic)
    projected through a random spatial pattern with unit mean channel gain, in
    independent pink noise scaled to ``snr_db`` (``None`` or ``inf`` for none).
    """
    freqs = [float(f) for f in frequencies]
    if len(set(freqs)) != len(freqs):
        raise ValidationError(f"stimulus frequencies must be distinct, got {freqs}")
    if channels < 1 or trials < 1 or duration <= 0:
        raise ValidationError("channels, trials and duration must be positive")
    rng = np.random.default_rng(seed)
    n = int(round(duration * fs))
    t = np.arange(n) / fs
    noiseless = snr_db is None or np.isinf(snr_db)
    out = []
    for f in freqs:
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(HARMONIC_AMPLITUDES))
        source = sum(
            a * np.sin(2.0 * np.pi * (h + 1) * f * t + p) for h, (a, p) in enumerate(zip(HARMONIC_AMPLITUDES, phases))
        )
        pattern = rng.standard_normal(channels)
        pattern *= np.sqrt(channels) / np.linalg.norm(pattern)
        clean = np.outer(pattern, source)
        signal_power = float(np.mean(clean**2))
        block = np.empty((channels, n, trials))
        for k in range(trials):
            if noiseless:
                block[:, :, k] = clean
            else:
                noise = pink_noise(channels, n, rng) * np.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
                block[:, :, k] = clean + noise
        out.append(block)
    return out
