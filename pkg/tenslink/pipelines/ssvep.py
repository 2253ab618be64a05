"""SSVEP frequency recognition: template construction per method and a
leave-one-trial-out window sweep."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.signal import butter, sosfiltfilt

from ..core.errors import ValidationError
from ..linked.cifa import cobe
from ..linked.mcca import cca, mcca_maxvar
from ..linked.mlcca import mlcca
from .synth import synth_ssvep

logger = logging.getLogger(__name__)

PASSBAND = (4.0, 40.0)
FILTER_ORDER = 4
REFERENCE_HARMONICS = 2
CIFA_BLOCK_RANK = 3
DEFAULT_WINDOWS = (0.5, 1.0, 2.0, 4.0)

ReferenceBuilder = Callable[[np.ndarray, float, float], np.ndarray]


def sine_cosine_reference(freq: float, n_samples: int, fs: float, harmonics: int = REFERENCE_HARMONICS) -> np.ndarray:
    t = np.arange(n_samples) / fs
    rows = []
    for h in range(1, harmonics + 1):
        rows.append(np.sin(2.0 * np.pi * h * freq * t))
        rows.append(np.cos(2.0 * np.pi * h * freq * t))
    return np.vstack(rows)


def bandpass(block: np.ndarray, fs: float, band: Sequence[float] = PASSBAND) -> np.ndarray:
    """Zero-phase Butterworth band-pass along the time axis (axis 1)."""
    high = min(band[1], 0.45 * fs)
    sos = butter(FILTER_ORDER, [band[0], high], btype="band", fs=fs, output="sos")
    return sosfiltfilt(sos, block, axis=1)


def _cca_reference(training: np.ndarray, freq: float, fs: float) -> np.ndarray:
    return sine_cosine_reference(freq, training.shape[1], fs)


def _mcca_reference(training: np.ndarray, freq: float, fs: float) -> np.ndarray:
    blocks = [training[:, :, j] for j in range(training.shape[2])]
    return mcca_maxvar(blocks, c=1).common_scores.T


def _cifa_reference(training: np.ndarray, freq: float, fs: float) -> np.ndarray:
    blocks = [training[:, :, j] for j in range(training.shape[2])]
    return cobe(blocks, 1, ranks=[CIFA_BLOCK_RANK] * len(blocks)).T


def _mwcca_reference(training: np.ndarray, freq: float, fs: float) -> np.ndarray:
    # channel × trial features, time is the sample mode
    x = np.transpose(training, (0, 2, 1))
    pair = mlcca(x, sine_cosine_reference(freq, training.shape[1], fs), pairs=1)[0]
    return pair.x_scores[None, :]


REFERENCE_BUILDERS: Dict[str, ReferenceBuilder] = {
    "cca": _cca_reference,
    "mwcca": _mwcca_reference,
    "mcca": _mcca_reference,
    "cifa": _cifa_reference,
}


def classify(test: np.ndarray, references: Sequence[np.ndarray]) -> int:
    """Index of the reference with the largest leading canonical correlation."""
    scores = [float(cca(test, ref, n_components=1).correlations[0]) for ref in references]
    return int(np.argmax(scores))


@dataclass(frozen=True)
class WindowScore:
    method: str
    window: float
    accuracy: float
    decisions: int


def ssvep_bench(
    classes: Sequence[np.ndarray],
    frequencies: Sequence[float],
    fs: float = 250.0,
    windows: Sequence[float] = DEFAULT_WINDOWS,
    methods: Optional[Sequence[str]] = None,
) -> List[WindowScore]:
    """Leave-one-trial-out accuracy of every method at every window length.

    ``classes[k]`` is the channel × time × trial recording of stimulus
    ``frequencies[k]``. Trial j of every class is held out together and
    templates are built from the remaining trials truncated to the window.
    """
    methods = list(methods or REFERENCE_BUILDERS)
    unknown = [m for m in methods if m not in REFERENCE_BUILDERS]
    if unknown:
        raise ValidationError(f"unknown ssvep methods {unknown}; choose from {sorted(REFERENCE_BUILDERS)}")
    if len(classes) != len(frequencies) or len(classes) < 2:
        raise ValidationError("need one recording per stimulus frequency and at least two stimuli")
    shapes = {np.shape(c) for c in classes}
    if len(shapes) != 1 or len(next(iter(shapes))) != 3:
        raise ValidationError(f"class recordings must share a channel × time × trial shape, got {sorted(shapes)}")
    _, n_total, n_trials = next(iter(shapes))
    if n_trials < 3:
        raise ValidationError("leave-one-trial-out needs at least three trials per class")
    filtered = [bandpass(np.asarray(c, dtype=np.float64), fs) for c in classes]

    rows: List[WindowScore] = []
    for window in windows:
        n = int(round(window * fs))
        if not 2 <= n <= n_total:
            raise ValidationError(f"window {window}s needs {n} samples but trials have {n_total}")
        for method in methods:
            build = REFERENCE_BUILDERS[method]
            hits = decisions = 0
            for held in range(n_trials):
                train_idx = [j for j in range(n_trials) if j != held]
                refs = [build(c[:, :n, train_idx], f, fs) for c, f in zip(filtered, frequencies)]
                for k, c in enumerate(filtered):
                    hits += int(classify(c[:, :n, held], refs) == k)
                    decisions += 1
            rows.append(WindowScore(method, float(window), hits / decisions, decisions))
            logger.debug("ssvep %s @ %.2fs: accuracy %.3f", method, window, hits / decisions)
    return rows


def ssvep_sweep(
    seeds: Sequence[int],
    snr_db: Optional[float],
    frequencies: Sequence[float] = (6.0, 8.0, 9.0, 10.0),
    channels: int = 8,
    trials: int = 6,
    fs: float = 250.0,
    windows: Sequence[float] = DEFAULT_WINDOWS,
    methods: Optional[Sequence[str]] = None,
) -> List[WindowScore]:
    """Average ``ssvep_bench`` accuracy over synthetic recordings, one per seed."""
    if not seeds:
        raise ValidationError("at least one seed is required")
    duration = max(windows)
    totals: Dict[tuple, List[WindowScore]] = {}
    for seed in seeds:
        classes = synth_ssvep(frequencies, channels, trials, duration, snr_db, seed=seed, fs=fs)
        for row in ssvep_bench(classes, frequencies, fs, windows, methods):
            totals.setdefault((row.method, row.window), []).append(row)
    out = [
        WindowScore(method, window, float(np.mean([r.accuracy for r in rs])), sum(r.decisions for r in rs))
        for (method, window), rs in totals.items()
    ]
    logger.info("ssvep sweep over %d seeds at %s dB: %d rows", len(seeds), snr_db, len(out))
    return out
