"""Multilinear CCA and PLS/HOPLS regression between two sample-indexed tensors.

Both ``x`` (I_1×…×I_N×K) and ``y`` (J_1×…×J_M×K) carry the K samples in their
trailing mode. A 1-D ``y`` is treated as a single response variable.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ValidationError
from ..core.tensor import (
    ArrayLike,
    as_array,
    leading_left_singular_vectors,
    multi_mode_product,
    outer_rank1,
    unfold,
)
from ..decomp.tucker import hooi


logger = logging.getLogger(__name__)

MLCCA_TOL = 1e-12
MLCCA_MAX_ITER = 500
RIDGE = 1e-10
HOPLS_HOOI_MAX_ITER = 1000
MLPLS_TOL = 1e-13
MLPLS_MAX_ITER = 1000


@dataclass(frozen=True)
class CanonicalPair:
    x_weights: Tuple[np.ndarray, ...]
    y_weights: Tuple[np.ndarray, ...]
    x_scores: np.ndarray
    y_scores: np.ndarray
    correlation: float


def _sample_tensors(x: ArrayLike, y: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    xa, ya = as_array(x), as_array(y)
    if ya.ndim == 1:
        ya = ya[None, :]
    if xa.ndim == 1:
        xa = xa[None, :]
    if xa.shape[-1] != ya.shape[-1]:
        raise ValidationError(f"x has {xa.shape[-1]} samples but y has {ya.shape[-1]}")
    if xa.shape[-1] < 2:
        raise ValidationError("at least two samples are required")
    return xa, ya


def _center(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=-1, keepdims=True)


def _project(x: np.ndarray, weights: Sequence[np.ndarray], keep: Optional[int] = None) -> np.ndarray:
    """Contract every feature mode except ``keep`` (1-based) with its weight vector."""
    mats = [None if n == keep else w[None, :] for n, w in enumerate(weights, start=1)] + [None]
    out = multi_mode_product(x, mats)
    rows = x.shape[keep - 1] if keep else 1
    return out.reshape(rows, x.shape[-1], order="F")


def _corr(u: np.ndarray, v: np.ndarray) -> float:
    denom = float(np.linalg.norm(u) * np.linalg.norm(v))
    return float(u @ v) / denom if denom else 0.0


def _ridge_regression(z: np.ndarray, target: np.ndarray) -> np.ndarray:
    gram = z @ z.T
    gram[np.diag_indices_from(gram)] += RIDGE * max(float(np.trace(gram)), 1e-300) / gram.shape[0]
    w = np.linalg.solve(gram, z @ target)
    nw = float(np.linalg.norm(w))
    return w / nw if nw else w


def _init_weights(x: np.ndarray) -> List[np.ndarray]:
    return [leading_left_singular_vectors(unfold(x, n), 1)[0][:, 0] for n in range(1, x.ndim)]


def _deflate(x: np.ndarray, score: np.ndarray) -> np.ndarray:
    ss = float(score @ score)
    if ss == 0:
        return x
    return x - (x @ score / ss)[..., None] * score


def mlcca(
    x: ArrayLike, y: ArrayLike, pairs: int = 1, *, max_iter: int = MLCCA_MAX_ITER, tol: float = MLCCA_TOL
) -> List[CanonicalPair]:
    """Rank-one multilinear CCA with alternating per-mode ridge regressions and score deflation."""
    xa, ya = _sample_tensors(x, y)
    if pairs < 1:
        raise ValidationError("pairs must be at least 1")
    xc, yc = _center(xa), _center(ya)
    out: List[CanonicalPair] = []
    for stage in range(pairs):
        wx, wy = _init_weights(xc), _init_weights(yc)
        u, v = _project(xc, wx)[0], _project(yc, wy)[0]
        rho = _corr(u, v)
        for it in range(max_iter):
            for n in range(1, xc.ndim):
                z = _project(xc, wx, keep=n)
                wx[n - 1] = _ridge_regression(z, v)
                u = z.T @ wx[n - 1]
            for m in range(1, yc.ndim):
                z = _project(yc, wy, keep=m)
                wy[m - 1] = _ridge_regression(z, u)
                v = z.T @ wy[m - 1]
            prev, rho = rho, _corr(u, v)
            if abs(rho - prev) < tol:
                break
        if rho < 0:
            wy[0] = -wy[0]
            v, rho = -v, -rho
        logger.debug("mlcca stage %d: rho %.10f after %d iterations", stage + 1, rho, it + 1)
        out.append(CanonicalPair(tuple(wx), tuple(wy), u, v, float(min(rho, 1.0))))
        xc, yc = _deflate(xc, u), _deflate(yc, v)
    logger.info("mlcca: correlations %s", ", ".join(f"{p.correlation:.4f}" for p in out))
    return out


@dataclass(frozen=True)
class PLSStage:
    x_weight: np.ndarray
    x_loading: np.ndarray
    y_loading: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class PLSModel:
    x_mean: np.ndarray
    y_mean: np.ndarray
    stages: Tuple[PLSStage, ...]
    fitted: np.ndarray
    method: str
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def _fit_stages(
    x: ArrayLike,
    y: ArrayLike,
    pairs: int,
    weight_of: Callable[[np.ndarray], np.ndarray],
    method: str,
    metadata: Dict[str, Any],
) -> PLSModel:
    """Shared stage loop: weight from the cross-covariance, score, regress both sides, deflate."""
    xa, ya = _sample_tensors(x, y)
    nx = xa.ndim - 1
    x_mean, y_mean = xa.mean(axis=-1), ya.mean(axis=-1)
    xc, yc = xa - x_mean[..., None], ya - y_mean[..., None]
    norm_x, norm_y = float(np.linalg.norm(xc)), float(np.linalg.norm(yc))
    if norm_x == 0 or norm_y == 0:
        raise ValidationError("x or y has zero variance across samples")
    fitted = np.zeros_like(yc)
    stages: List[PLSStage] = []
    axes = list(range(nx))
    for stage in range(pairs):
        z = np.tensordot(xc, yc, axes=([-1], [-1]))
        if np.linalg.norm(z) <= 1e-12 * norm_x * norm_y:
            logger.info("%s: cross-covariance exhausted after %d stages", method, stage)
            break
        weight = weight_of(z)
        t = np.tensordot(xc, weight, axes=(axes, axes))
        tt = float(t @ t)
        if tt <= 1e-300:
            break
        p = xc @ t / tt
        c = yc @ t / tt
        xc = xc - p[..., None] * t
        yc = yc - c[..., None] * t
        fitted = fitted + c[..., None] * t
        stages.append(PLSStage(x_weight=weight, x_loading=p, y_loading=c, scores=t))
    fitted = fitted + y_mean[..., None]
    logger.info("%s: %d stages, training relative error %.3e", method, len(stages), float(np.linalg.norm(ya - fitted)) / norm_y)
    y_was_vector = as_array(y).ndim == 1
    return PLSModel(
        x_mean=x_mean,
        y_mean=y_mean,
        stages=tuple(stages),
        fitted=fitted[0] if y_was_vector else fitted,
        method=method,
        metadata={**metadata, "y_was_vector": y_was_vector},
    )


def hopls_fit(
    x: ArrayLike,
    y: ArrayLike,
    pairs: int,
    ranks: Sequence[int],
    y_ranks: Optional[Sequence[int]] = None,
) -> PLSModel:
    """Stage-wise PLS with Tucker-structured weights taken from the cross-covariance tensor.

    Each stage fits a Tucker model of Σ_k X_k ∘ Y_k at ``ranks`` (x modes) and
    ``y_ranks`` (y modes); the x weight is the leading x-side direction of that
    model. Scores regress both sides, which are then deflated.
    """
    xa, ya = _sample_tensors(x, y)
    nx = xa.ndim - 1
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != nx:
        raise ValidationError(f"{len(ranks)} ranks given for {nx} feature modes of x")
    if y_ranks is None:
        y_ranks = tuple(min(max(ranks), s) for s in ya.shape[:-1])
    y_ranks = tuple(int(r) for r in y_ranks)

    def tucker_weight(z: np.ndarray) -> np.ndarray:
        zr = [min(r, s) for r, s in zip(ranks + y_ranks, z.shape)]
        tucker = hooi(z, zr, max_iter=HOPLS_HOOI_MAX_ITER)
        core = tucker.core
        gmat = core.reshape(math.prod(core.shape[:nx]), -1, order="F")
        g, _ = leading_left_singular_vectors(gmat, 1)
        weight = multi_mode_product(g[:, 0].reshape(core.shape[:nx], order="F"), tucker.factors[:nx])
        return weight / np.linalg.norm(weight)

    return _fit_stages(x, y, pairs, tucker_weight, "hopls", {"ranks": ranks, "y_ranks": y_ranks})


def rank_one_directions(z: np.ndarray, *, tol: float = MLPLS_TOL, max_iter: int = MLPLS_MAX_ITER) -> List[np.ndarray]:
    """Best rank-one approximation of ``z`` by the higher-order power method.

    Starts from the leading left singular vector of every unfolding and
    updates one unit vector at a time from the contraction of ``z`` with all
    the others, until no vector moves (up to sign) by more than ``tol``.
    """
    vecs = [leading_left_singular_vectors(unfold(z, n), 1)[0][:, 0] for n in range(1, z.ndim + 1)]
    for it in range(max_iter):
        change = 0.0
        for n in range(z.ndim):
            mats = [None if m == n else v[None, :] for m, v in enumerate(vecs)]
            v = multi_mode_product(z, mats).ravel()
            nv = float(np.linalg.norm(v))
            if nv == 0:
                return vecs
            v = v / nv
            change = max(change, min(float(np.linalg.norm(v - vecs[n])), float(np.linalg.norm(v + vecs[n]))))
            vecs[n] = v
        if change < tol:
            logger.debug("power method converged after %d sweeps", it + 1)
            break
    return vecs


def mlpls_fit(x: ArrayLike, y: ArrayLike, pairs: int) -> PLSModel:
    """PLS with rank-one (outer-product) x weights from the best rank-one approximation of the cross-covariance."""
    xa, ya = _sample_tensors(x, y)
    nx = xa.ndim - 1

    def outer_weight(z: np.ndarray) -> np.ndarray:
        weight = outer_rank1(rank_one_directions(z)[:nx])
        return weight / np.linalg.norm(weight)

    return _fit_stages(x, y, pairs, outer_weight, "mlpls", {"ranks": (1,) * nx, "y_ranks": (1,) * (ya.ndim - 1)})


def hopls_predict(model: PLSModel, x_new: ArrayLike) -> np.ndarray:
    """Responses for new samples (trailing mode) or a single sample of shape ``x_mean.shape``.

    The stages act on deviations from the training mean ``x_mean``, so the
    prediction at ``x_mean`` itself is ``y_mean``. An all-zero input is an
    ordinary sample and gives ``y_mean`` only when the training data were
    centered.
    """
    xa = as_array(x_new)
    single = xa.shape == model.x_mean.shape
    if single:
        xa = xa[..., None]
    if xa.shape[:-1] != model.x_mean.shape:
        raise ValidationError(f"expected samples of shape {model.x_mean.shape}, got {xa.shape[:-1]}")
    axes = list(range(model.x_mean.ndim))
    xr = xa - model.x_mean[..., None]
    pred = np.zeros(model.y_mean.shape + (xa.shape[-1],))
    for stage in model.stages:
        t = np.tensordot(xr, stage.x_weight, axes=(axes, axes))
        pred = pred + stage.y_loading[..., None] * t
        xr = xr - stage.x_loading[..., None] * t
    pred = pred + model.y_mean[..., None]
    if model.metadata.get("y_was_vector"):
        pred = pred[0]
    return pred[..., 0] if single else pred
