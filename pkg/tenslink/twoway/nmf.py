"""Nonnegative matrix factorization by hierarchical alternating least squares.

Objective::

    ‖X − A Bᵀ‖² + λ‖B‖₁ + β‖BᵀB − I‖²

A positive ``orthogonality`` β drives the sources toward orthonormal columns.
The mixing columns, and the sources when β = 0, are updated by exact
nonnegative column solves. With β > 0 the sources take projected-gradient
steps accepted only on sufficient decrease. The objective never increases.
"""
from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np

from ..core.errors import ValidationError
from .factorization import TwoWayFactorization


logger = logging.getLogger(__name__)

NMF_TOL = 1e-8
NMF_MAX_ITER = 500
PG_STEPS = 10
PG_HALVINGS = 30
ARMIJO = 1e-4
_TINY = 1e-300


def nmf_objective(x: np.ndarray, a: np.ndarray, b: np.ndarray, sparsity: float, orthogonality: float) -> float:
    resid = float(np.sum((x - a @ b.T) ** 2))
    value = resid + sparsity * float(np.sum(b))
    if orthogonality:
        value += orthogonality * float(np.sum((b.T @ b - np.eye(b.shape[1])) ** 2))
    return value


def _orthogonal_source_steps(
    x: np.ndarray, a: np.ndarray, b: np.ndarray, sparsity: float, beta: float
) -> np.ndarray:
    """Projected-gradient steps on B with backtracking; returns B unchanged if no step decreases."""
    eye = np.eye(b.shape[1])
    ata = a.T @ a
    current = nmf_objective(x, a, b, sparsity, beta)
    for _ in range(PG_STEPS):
        btb = b.T @ b
        grad = -2.0 * (x.T @ a - b @ ata) + sparsity + 4.0 * beta * b @ (btb - eye)
        step = 1.0 / (2.0 * np.linalg.norm(ata, 2) + 4.0 * beta * (3.0 * np.linalg.norm(btb, 2) + 1.0))
        for _ in range(PG_HALVINGS):
            trial = np.maximum(0.0, b - step * grad)
            value = nmf_objective(x, a, trial, sparsity, beta)
            if value <= current + ARMIJO * float(np.sum(grad * (trial - b))):
                break
            step *= 0.5
        else:
            return b
        if value >= current:
            return b
        b, current = trial, value
    return b


def nmf(
    x: np.ndarray,
    r: int,
    *,
    orthogonal: bool = False,
    sparsity: float = 0.0,
    orthogonality: float = 1.0,
    seed: Optional[int] = None,
    max_iter: int = NMF_MAX_ITER,
    tol: float = NMF_TOL,
) -> TwoWayFactorization:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if r < 1:
        raise ValidationError(f"nmf rank must be at least 1, got {r}")
    if np.any(x < 0):
        raise ValidationError("nmf needs an entrywise nonnegative matrix")
    if sparsity < 0 or orthogonality < 0:
        raise ValidationError("nmf penalties must be nonnegative")
    beta = orthogonality if orthogonal else 0.0
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(float(x.mean()), _TINY) / r)
    a = rng.uniform(0.0, 1.0, size=(x.shape[0], r)) * scale
    b = rng.uniform(0.0, 1.0, size=(x.shape[1], r)) * scale

    trace: List[float] = [nmf_objective(x, a, b, sparsity, beta)]
    for it in range(max_iter):
        xb, btb = x @ b, b.T @ b
        for j in range(r):
            if btb[j, j] <= _TINY:
                continue
            a[:, j] = np.maximum(0.0, a[:, j] + (xb[:, j] - a @ btb[:, j]) / btb[j, j])
        if beta > 0:
            b = _orthogonal_source_steps(x, a, b, sparsity, beta)
        else:
            xta, ata = x.T @ a, a.T @ a
            for j in range(r):
                if ata[j, j] <= _TINY:
                    continue
                grad = xta[:, j] - b @ ata[:, j] - 0.5 * sparsity
                b[:, j] = np.maximum(0.0, b[:, j] + grad / ata[j, j])
        trace.append(nmf_objective(x, a, b, sparsity, beta))
        logger.debug("nmf iter %d objective %.12e", it + 1, trace[-1])
        if trace[-2] - trace[-1] <= tol * max(trace[-2], _TINY):
            break
    logger.info("nmf rank %d: %d iterations, objective %.6e", r, len(trace) - 1, trace[-1])
    method = "nmf-orthogonal" if orthogonal else ("nmf-sparse" if sparsity > 0 else "nmf")
    return TwoWayFactorization(
        mixing=a,
        sources=b,
        method=method,
        objective_trace=tuple(trace),
        metadata={"sparsity": sparsity, "orthogonality": beta, "iterations": len(trace) - 1},
    )
