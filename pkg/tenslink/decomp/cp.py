"""CP decomposition by alternating least squares, plus the nonnegative HALS variant."""
from __future__ import annotations

import logging
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from ..core.errors import ValidationError
from ..core.tensor import ArrayLike, as_array, khatri_rao_chain, leading_left_singular_vectors, unfold
from .models import KruskalTensor, full_from_factors


logger = logging.getLogger(__name__)

CP_TOL = 1e-8
CP_MAX_ITER = 500
RIDGE_SCALE = 1e-12


def mttkrp(x: np.ndarray, factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """Matricized tensor times Khatri-Rao product of every factor but ``mode`` (1-based)."""
    others = [f for p, f in enumerate(factors, start=1) if p != mode]
    return unfold(x, mode) @ khatri_rao_chain(list(reversed(others)))


def gram_hadamard(factors: Sequence[np.ndarray], mode: int) -> np.ndarray:
    r = factors[0].shape[1]
    v = np.ones((r, r))
    for p, f in enumerate(factors, start=1):
        if p != mode:
            v *= f.T @ f
    return v


def init_factors(
    x: np.ndarray, rank: int, init: str | Sequence[np.ndarray] = "hosvd", seed: Optional[int] = None
) -> List[np.ndarray]:
    """HOSVD leading vectors (seeded random columns fill modes shorter than ``rank``),
    ``"random"`` Gaussian factors, or a caller-supplied list."""
    rng = np.random.default_rng(seed)
    if not isinstance(init, str):
        factors = [np.array(f, dtype=np.float64, copy=True) for f in init]
        if len(factors) != x.ndim or any(f.shape != (s, rank) for f, s in zip(factors, x.shape)):
            raise ValidationError("initial factors do not match the tensor shape and rank")
        return factors
    if init == "random":
        return [rng.standard_normal((s, rank)) for s in x.shape]
    if init != "hosvd":
        raise ValidationError(f"unknown init {init!r}")
    factors = []
    for n, size in enumerate(x.shape, start=1):
        k = min(rank, size)
        u, _ = leading_left_singular_vectors(unfold(x, n), k)
        if k < rank:
            u = np.hstack([u, rng.standard_normal((size, rank - k))])
        factors.append(u)
    return factors


def solve_normal_equations(v: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``F v = rhs`` for F, adding a small ridge when ``v`` is near singular."""
    eig = np.linalg.eigvalsh(v)
    ridged = eig[0] <= RIDGE_SCALE * max(eig[-1], 0.0)
    if ridged:
        v = v + RIDGE_SCALE * max(np.trace(v), 1.0) * np.eye(v.shape[0])
    c = scipy.linalg.cho_factor(v)
    return scipy.linalg.cho_solve(c, rhs.T).T, bool(ridged)


def _rel_error(x: np.ndarray, factors: Sequence[np.ndarray], norm_x: float) -> float:
    approx = full_from_factors(factors)
    return float(np.linalg.norm(x - approx)) / (norm_x or 1.0)


def _normalize_sweep(factors: List[np.ndarray]) -> None:
    # norms move into the last factor so the model is unchanged
    for f in factors[:-1]:
        norms = np.linalg.norm(f, axis=0)
        norms[norms == 0] = 1.0
        f /= norms
        factors[-1] *= norms


def cp_als(
    x: ArrayLike,
    rank: int,
    *,
    init: str | Sequence[np.ndarray] = "hosvd",
    seed: Optional[int] = None,
    max_iter: int = CP_MAX_ITER,
    tol: float = CP_TOL,
) -> KruskalTensor:
    arr = as_array(x)
    if rank < 1:
        raise ValidationError(f"CP rank must be at least 1, got {rank}")
    factors = init_factors(arr, rank, init, seed)
    norm_x = float(np.linalg.norm(arr))
    trace: List[float] = []
    regularized = False
    converged = False
    for it in range(max_iter):
        for n in range(1, arr.ndim + 1):
            factors[n - 1], ridged = solve_normal_equations(gram_hadamard(factors, n), mttkrp(arr, factors, n))
            regularized |= ridged
        _normalize_sweep(factors)
        trace.append(1.0 - _rel_error(arr, factors, norm_x))
        logger.debug("cp_als sweep %d fit %.12f", it + 1, trace[-1])
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break
    if regularized:
        logger.warning("cp_als used a ridge on near-singular normal equations (rank %d)", rank)
    if not converged:
        logger.warning("cp_als stopped at max_iter=%d without converging", max_iter)
    logger.info("cp_als rank %d: %d sweeps, fit %.10f", rank, len(trace), trace[-1] if trace else float("nan"))
    return KruskalTensor.from_factors(
        factors,
        metadata={
            "method": "cp_als",
            "fit_trace": trace,
            "iterations": len(trace),
            "converged": converged,
            "regularized": regularized,
        },
    )


def cp_nonneg(
    x: ArrayLike,
    rank: int,
    *,
    seed: Optional[int] = None,
    max_iter: int = CP_MAX_ITER,
    tol: float = CP_TOL,
) -> KruskalTensor:
    """Nonnegative CP by hierarchical ALS (one column at a time, clipped at zero)."""
    arr = as_array(x)
    if rank < 1:
        raise ValidationError(f"CP rank must be at least 1, got {rank}")
    if np.any(arr < 0):
        raise ValidationError("cp_nonneg needs an entrywise nonnegative tensor")
    rng = np.random.default_rng(seed)
    scale = (float(np.linalg.norm(arr)) / np.sqrt(arr.size)) ** (1.0 / arr.ndim) if arr.size else 1.0
    factors = [rng.uniform(0.1, 1.0, size=(s, rank)) * scale for s in arr.shape]
    norm_x = float(np.linalg.norm(arr))
    objective: List[float] = []
    for it in range(max_iter):
        for n in range(1, arr.ndim + 1):
            v = gram_hadamard(factors, n)
            m = mttkrp(arr, factors, n)
            f = factors[n - 1]
            for j in range(rank):
                if v[j, j] <= 1e-300:
                    continue
                f[:, j] = np.maximum(0.0, f[:, j] + (m[:, j] - f @ v[:, j]) / v[j, j])
        _normalize_sweep(factors)
        objective.append(_rel_error(arr, factors, norm_x) ** 2)
        logger.debug("cp_nonneg sweep %d objective %.12e", it + 1, objective[-1])
        if len(objective) > 1 and objective[-2] - objective[-1] <= tol * max(objective[-2], 1e-300):
            break
    logger.info("cp_nonneg rank %d: %d sweeps, relative error %.3e", rank, len(objective), np.sqrt(objective[-1]))
    return KruskalTensor.from_factors(
        factors,
        metadata={"method": "cp_nonneg", "objective_trace": objective, "iterations": len(objective)},
    )
