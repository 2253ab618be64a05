"""Second-order blind identification.

Sources are identified from the joint approximate diagonalization of whitened
lagged covariance matrices (or, with ``statistic="cumulant"``, of the slices of
the whitened fourth-order cumulant tensor). The result is determined up to
column permutation and scaling.
"""
from __future__ import annotations

import itertools
import logging
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import IdentifiabilityError, ValidationError
from ..core.tensor import canonical_signs, pinv
from .factorization import TwoWayFactorization


logger = logging.getLogger(__name__)

JD_THRESHOLD = 1e-12
JD_MAX_SWEEPS = 100
MAX_DEFAULT_LAG = 10
SEPARATION_FACTOR = 6.0


def default_lags(n_samples: int) -> Tuple[int, ...]:
    return tuple(range(0, min(MAX_DEFAULT_LAG, n_samples // 4) + 1))


def lagged_covariances(x: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    """Stack of symmetrized lagged covariances, shape I×I×len(lags).

    The data is used as given; callers center it first when they need to.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_chan, n_samples = x.shape
    lags = [int(t) for t in lags]
    if not lags:
        raise ValidationError("at least one lag is required")
    if min(lags) < 0 or max(lags) >= n_samples:
        raise ValidationError(f"lags must lie in [0, {n_samples - 1}], got {min(lags)}..{max(lags)}")
    out = np.empty((n_chan, n_chan, len(lags)))
    for k, tau in enumerate(lags):
        c = x[:, tau:] @ x[:, : n_samples - tau].T / (n_samples - tau)
        out[:, :, k] = 0.5 * (c + c.T)
    return out


def cumulant_tensor(x: np.ndarray) -> np.ndarray:
    """Sample fourth-order cumulant tensor I×I×I×I of the (centered) rows of ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_chan, n_samples = x.shape
    if n_samples < 4:
        raise ValidationError("cumulant_tensor needs at least 4 samples")
    xc = x - x.mean(axis=1, keepdims=True)
    cov = xc @ xc.T / n_samples
    # row (i + I*j) holds x_i(t) x_j(t)
    products = np.einsum("it,jt->ijt", xc, xc).reshape(n_chan * n_chan, n_samples, order="F")
    m4 = (products @ products.T / n_samples).reshape((n_chan,) * 4, order="F")
    return (
        m4
        - np.einsum("ij,kl->ijkl", cov, cov)
        - np.einsum("ik,jl->ijkl", cov, cov)
        - np.einsum("il,jk->ijkl", cov, cov)
    )


def joint_diagonalize(
    matrices: np.ndarray, *, threshold: float = JD_THRESHOLD, max_sweeps: int = JD_MAX_SWEEPS
) -> Tuple[np.ndarray, np.ndarray]:
    """Jacobi-angle joint diagonalization of L symmetric m×m matrices (stacked L×m×m).

    Returns the orthogonal V and the rotated matrices Vᵀ M_l V.
    """
    mats = np.array(matrices, dtype=np.float64, copy=True)
    m = mats.shape[1]
    v = np.eye(m)
    for sweep in range(max_sweeps):
        rotated = False
        for p, q in itertools.combinations(range(m), 2):
            g = np.vstack([mats[:, p, p] - mats[:, q, q], mats[:, p, q] + mats[:, q, p]])
            gg = g @ g.T
            ton = gg[0, 0] - gg[1, 1]
            toff = gg[0, 1] + gg[1, 0]
            theta = 0.5 * np.arctan2(toff, ton + np.sqrt(ton * ton + toff * toff))
            if abs(theta) <= threshold:
                continue
            rotated = True
            c, s = np.cos(theta), np.sin(theta)
            rot = np.array([[c, -s], [s, c]])
            idx = [p, q]
            v[:, idx] = v[:, idx] @ rot
            mats[:, idx, :] = np.einsum("ji,ljk->lik", rot, mats[:, idx, :])
            mats[:, :, idx] = mats[:, :, idx] @ rot
        if not rotated:
            logger.debug("joint diagonalization converged after %d sweeps", sweep + 1)
            break
    else:
        logger.warning("joint diagonalization hit max_sweeps=%d", max_sweeps)
    return v, mats


def _whitener(xc: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    cov = xc @ xc.T / xc.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:r]
    d, e = evals[order], evecs[:, order]
    if d[-1] <= 1e-12 * max(d[0], 1e-300):
        raise IdentifiabilityError(f"data covariance has fewer than {r} significant directions")
    return (e / np.sqrt(d)).T, e * np.sqrt(d)


def _check_separable(diagonals: np.ndarray, n_samples: int) -> float:
    """Minimum distance between per-source diagonal profiles; raises when sources coincide."""
    n_mats, r = diagonals.shape
    if r < 2:
        return float("inf")
    dmin = min(
        float(np.linalg.norm(diagonals[:, i] - diagonals[:, j])) for i, j in itertools.combinations(range(r), 2)
    )
    bound = SEPARATION_FACTOR * np.sqrt(n_mats / n_samples)
    if dmin < bound:
        raise IdentifiabilityError(
            f"source lag profiles are indistinguishable (min separation {dmin:.3g} < {bound:.3g})"
        )
    return dmin


def blind_identify(
    x: np.ndarray,
    r: int,
    lags: Optional[Sequence[int]] = None,
    *,
    statistic: Literal["covariance", "cumulant"] = "covariance",
) -> TwoWayFactorization:
    """Estimate mixing Â (I×r) and sources B̂ (T×r) from x ≈ Â B̂ᵀ."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n_chan, n_samples = x.shape
    if not 1 <= r <= n_chan:
        raise ValidationError(f"number of sources {r} must lie in [1, {n_chan}]")
    xc = x - x.mean(axis=1, keepdims=True)
    whiten, dewhiten = _whitener(xc, r)
    z = whiten @ xc
    separation = float("inf")
    if statistic == "covariance":
        lags = tuple(lags) if lags is not None else default_lags(n_samples)
        stack = np.moveaxis(lagged_covariances(z, lags), 2, 0)
        v, diag_mats = joint_diagonalize(stack)
        informative = [k for k, tau in enumerate(lags) if tau > 0]
        if informative:
            diagonals = np.array([np.diag(diag_mats[k]) for k in informative])
            separation = _check_separable(diagonals, n_samples)
    elif statistic == "cumulant":
        q = cumulant_tensor(z)
        stack = np.array([q[:, :, k, l] for k in range(r) for l in range(r)])
        v, _ = joint_diagonalize(stack)
    else:
        raise ValidationError(f"unknown statistic {statistic!r}")
    mixing = dewhiten @ v
    mixing = mixing * canonical_signs(mixing)
    sources = (pinv(mixing) @ x).T
    logger.info("blind_identify (%s): %d sources from %d channels", statistic, r, n_chan)
    return TwoWayFactorization(
        mixing=mixing,
        sources=sources,
        method="sobi" if statistic == "covariance" else "cumulant-jd",
        metadata={"statistic": statistic, "lags": tuple(lags) if statistic == "covariance" else (), "separation": separation},
    )


def amari_index(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Normalized Amari distance in [0, 1]; 0 iff ``pinv(estimate) @ truth`` is a scaled permutation."""
    est = np.atleast_2d(np.asarray(estimate, dtype=np.float64))
    tru = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if est.shape != tru.shape:
        raise ValidationError(f"amari_index needs equal shapes, got {est.shape} and {tru.shape}")
    r = est.shape[1]
    for name, m in (("estimate", est), ("truth", tru)):
        if np.linalg.matrix_rank(m) < r:
            raise ValidationError(f"{name} mixing matrix is rank deficient")
    if r == 1:
        return 0.0
    p = np.abs(pinv(est) @ tru)
    rows = np.sum(p.sum(axis=1) / p.max(axis=1) - 1.0)
    cols = np.sum(p.sum(axis=0) / p.max(axis=0) - 1.0)
    return float((rows + cols) / (2.0 * r * (r - 1)))
