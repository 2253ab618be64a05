from __future__ import annotations

from typing import Sequence

import numpy as np
import pytest
from scipy.signal import lfilter


def _ar_sources(n_samples: int, seed: int, poles: Sequence[float] = (0.95, 0.5, -0.6)) -> np.ndarray:
    """Independent unit-variance AR(1) sources with distinct spectra, one per row."""
    rng = np.random.default_rng(seed)
    rows = []
    for p in poles:
        s = lfilter([1.0], [1.0, -p], rng.standard_normal(n_samples))
        rows.append((s - s.mean()) / s.std())
    return np.vstack(rows)


def _principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def ar_sources():
    return _ar_sources


@pytest.fixture
def principal_angles():
    return _principal_angles
