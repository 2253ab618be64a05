"""Smooth component analysis.

Minimizes ‖X − ABᵀ‖² + γ1‖L A‖₂,₁ + γ2‖L B‖₂,₁ where L is the square
first-difference operator (ones on the diagonal, −1 on the superdiagonal, so
the last row keeps the final entry) and ‖·‖₂,₁ sums column 2-norms. Each
column update minimizes a quadratic majorizer of the penalty, so the
objective is nonincreasing.
"""
from __future__ import annotations

import logging
from typing import List

import numpy as np
import scipy.linalg

from ..core.errors import ValidationError
from ..core.tensor import canonical_signs
from .factorization import TwoWayFactorization


logger = logging.getLogger(__name__)

SMCA_TOL = 1e-8
SMCA_MAX_ITER = 500
MIN_WEIGHT = 1e-12


def apply_difference(m: np.ndarray) -> np.ndarray:
    """L m along rows: m_i − m_{i+1}, with the last row left as is."""
    m = np.asarray(m, dtype=np.float64)
    out = m.copy()
    out[:-1] = m[:-1] - m[1:]
    return out


def difference_norm(m: np.ndarray) -> float:
    """‖L m‖₂,₁, the sum of the column norms of L m."""
    return float(np.sum(np.linalg.norm(apply_difference(m), axis=0)))


def _smooth_solve(diag_shift: float, penalty: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (diag_shift·I + penalty·LᵀL) y = rhs; LᵀL is tridiagonal with diagonal (1, 2, …, 2)."""
    n = rhs.size
    if penalty == 0.0:
        return rhs / diag_shift
    if n == 1:
        return rhs / (diag_shift + penalty)
    main = np.full(n, 2.0)
    main[0] = 1.0
    ab = np.zeros((2, n))
    ab[0, 1:] = -penalty
    ab[1, :] = diag_shift + penalty * main
    return scipy.linalg.solveh_banded(ab, rhs)


def _update_columns(
    target: np.ndarray, fixed: np.ndarray, current: np.ndarray, gamma: float
) -> None:
    """Column-wise majorize-minimize update of ``current`` in target ≈ current·fixedᵀ."""
    proj = target @ fixed
    gram = fixed.T @ fixed
    for j in range(current.shape[1]):
        if gram[j, j] <= 1e-300:
            continue
        rhs = proj[:, j] - current @ gram[:, j] + current[:, j] * gram[j, j]
        w = max(float(np.linalg.norm(apply_difference(current[:, j]))), MIN_WEIGHT)
        current[:, j] = _smooth_solve(gram[j, j], gamma / (2.0 * w), rhs)


def smca_objective(x: np.ndarray, a: np.ndarray, b: np.ndarray, gamma1: float, gamma2: float) -> float:
    return float(np.sum((x - a @ b.T) ** 2)) + gamma1 * difference_norm(a) + gamma2 * difference_norm(b)


def smca(
    x: np.ndarray,
    r: int,
    gamma1: float = 0.0,
    gamma2: float = 0.0,
    *,
    max_iter: int = SMCA_MAX_ITER,
    tol: float = SMCA_TOL,
) -> TwoWayFactorization:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if gamma1 < 0 or gamma2 < 0:
        raise ValidationError(f"smoothness penalties must be nonnegative, got {gamma1}, {gamma2}")
    if not 1 <= r <= min(x.shape):
        raise ValidationError(f"smca rank {r} outside [1, {min(x.shape)}]")
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    a = u[:, :r] * s[:r]
    b = vt[:r].T.copy()

    trace: List[float] = [smca_objective(x, a, b, gamma1, gamma2)]
    for it in range(max_iter):
        _update_columns(x, b, a, gamma1)
        _update_columns(x.T, a, b, gamma2)
        trace.append(smca_objective(x, a, b, gamma1, gamma2))
        logger.debug("smca iter %d objective %.12e", it + 1, trace[-1])
        if abs(trace[-2] - trace[-1]) <= tol * max(trace[-2], 1e-300):
            break
    signs = canonical_signs(a)
    logger.info("smca rank %d: %d iterations, objective %.6e", r, len(trace) - 1, trace[-1])
    return TwoWayFactorization(
        mixing=a * signs,
        sources=b * signs,
        method="smca",
        objective_trace=tuple(trace),
        metadata={"gamma1": gamma1, "gamma2": gamma2, "iterations": len(trace) - 1},
    )
