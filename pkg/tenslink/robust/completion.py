"""Completion of partially observed matrices and tensors.

The nuclear-norm solvers finish with an unshrunk low-rank refit that is kept
only when it reproduces the observed entries; otherwise the convex answer is
returned unchanged.
"""
from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from ..core.errors import ValidationError
from ..core.tensor import fold, leading_left_singular_vectors, unfold
from ..decomp.cp import init_factors, mttkrp
from ..decomp.models import KruskalTensor, TuckerTensor, full_from_factors
from ..decomp.tucker import hooi
from .models import MaskedTensor
from .refit import lowest_rank_fit
from .rpca import svt


logger = logging.getLogger(__name__)

SOFT_IMPUTE_TOL = 1e-9
SOFT_IMPUTE_MAX_ITER = 5000
HALRTC_GROWTH = 1.1
HALRTC_MAX_ITER = 500
HALRTC_TOL = 1e-8
# ρ never grows past this multiple of its starting value.
HALRTC_RHO_SPAN = 1e10
HALRTC_POLISH_ITER = 2000
# Singular values below these fractions of the largest are dropped when the
# polish picks per-mode ranks; tried from the coarsest.
HALRTC_RANK_FLOORS = (1e-1, 1e-2, 1e-3)
WOPT_MAX_ITER = 5000
WOPT_RIDGE = 1e-3
WOPT_POLISH_RIDGE = 1e-12
WOPT_RESTARTS = 4
EM_TOL = 1e-10
EM_MAX_ITER = 1000


def soft_impute(
    y: MaskedTensor,
    tau: Optional[float] = None,
    *,
    tol: float = SOFT_IMPUTE_TOL,
    max_iter: int = SOFT_IMPUTE_MAX_ITER,
    refit: bool = True,
) -> np.ndarray:
    """Nuclear-norm completion of a matrix by iterated singular-value soft-thresholding.

    The threshold starts at σ_max/2 of the zero-filled data and halves down to
    ``tau`` (default 1e-4·σ_max). With ``refit`` the smallest rank up to that
    of the final iterate whose unshrunk fit reproduces the observed entries
    replaces the shrunk estimate. Observed entries are reproduced exactly.
    """
    if len(y.shape) != 2:
        raise ValidationError("soft_impute works on matrices")
    y.require_observed()
    if y.mask.all():
        return np.array(y.values)
    sigma_max = float(np.linalg.norm(y.values, 2))
    if sigma_max == 0:
        return np.zeros(y.shape)
    target = 1e-4 * sigma_max if tau is None else float(tau)
    if target < 0:
        raise ValidationError("shrinkage must be nonnegative")
    z = np.array(y.values)
    level = max(sigma_max / 2.0, target)
    used = 0
    rank = 0
    while True:
        while used < max_iter:
            used += 1
            new, rank = svt(y.clamp(z), level)
            change = float(np.linalg.norm(new - z)) / max(float(np.linalg.norm(z)), 1e-300)
            z = new
            if change < tol:
                break
        if level <= target or used >= max_iter:
            break
        level = max(level / 2.0, target)
    if used >= max_iter:
        logger.warning("soft_impute used all %d iterations", max_iter)
    if refit and rank > 0:
        found = lowest_rank_fit(y.values, y.mask, z, rank)
        if found is not None:
            z = found[0]
            logger.debug("soft_impute: unshrunk rank-%d refit reproduces the observed entries", found[1])
    logger.info("soft_impute: %d iterations, final threshold %.3e, rank %d", used, level, rank)
    return y.clamp(z)


def _check_weights(alphas: Optional[Sequence[float]], order: int) -> np.ndarray:
    if alphas is None:
        return np.full(order, 1.0 / order)
    a = np.asarray(alphas, dtype=np.float64)
    if a.shape != (order,) or np.any(a < 0) or abs(float(a.sum()) - 1.0) > 1e-10:
        raise ValidationError(f"mode weights must be {order} nonnegative numbers summing to 1, got {alphas}")
    return a


def initial_penalty(x: np.ndarray, weights: np.ndarray, active: Sequence[int]) -> float:
    """ρ at which every block threshold α_n/ρ is at most half the smallest leading singular value."""
    tops = [float(np.linalg.norm(unfold(x, n), 2)) for n in active]
    return float(max(weights[n - 1] for n in active)) / (0.5 * min(tops))


def _truncate_modes(x: np.ndarray, ranks: Dict[int, int]) -> np.ndarray:
    out = x
    for n, r in ranks.items():
        u, _ = leading_left_singular_vectors(unfold(out, n), r)
        out = fold(u @ (u.T @ unfold(out, n)), n, x.shape)
    return out


def _mode_ranks(x: np.ndarray, active: Sequence[int], floor: float) -> Dict[int, int]:
    ranks = {}
    for n in active:
        s = np.linalg.svd(unfold(x, n), compute_uv=False)
        ranks[n] = max(int(np.sum(s > floor * s[0])), 1) if s[0] > 0 else 1
    return ranks


def _multilinear_polish(obs: MaskedTensor, x: np.ndarray, active: Sequence[int], tol: float) -> Optional[np.ndarray]:
    """Hard-impute at the per-mode ranks of ``x``; None unless the observed entries are matched."""
    ref = float(np.linalg.norm(obs.values[obs.mask]))
    tried = set()
    for floor in HALRTC_RANK_FLOORS:
        ranks = _mode_ranks(x, active, floor)
        key = tuple(sorted(ranks.items()))
        if key in tried:
            continue
        tried.add(key)
        if len(active) == 1:
            n = active[0]
            found = lowest_rank_fit(unfold(obs.values, n), unfold(obs.mask, n), unfold(x, n), ranks[n])
            if found is not None:
                return obs.clamp(fold(found[0], n, obs.shape))
            continue
        z = x
        prev = np.inf
        for it in range(HALRTC_POLISH_ITER):
            proj = _truncate_modes(z, ranks)
            resid = float(np.linalg.norm((proj - obs.values)[obs.mask])) / ref
            if resid < tol:
                logger.debug("halrtc polish at ranks %s matched after %d sweeps", ranks, it + 1)
                return obs.clamp(proj)
            if it >= 50 and resid > prev * (1.0 - 1e-6):
                break
            prev = resid
            z = obs.clamp(proj)
    return None


def halrtc(
    y: MaskedTensor,
    alphas: Optional[Sequence[float]] = None,
    rho: Optional[float] = None,
    *,
    growth: float = HALRTC_GROWTH,
    max_iter: int = HALRTC_MAX_ITER,
    tol: float = HALRTC_TOL,
    polish: bool = True,
) -> np.ndarray:
    """ADMM on the weighted sum of unfolding nuclear norms with a consensus tensor.

    Data are scaled to unit RMS over the observed entries. The default ``rho``
    puts every block threshold below the leading singular value of its
    zero-filled unfolding, so the first sweep already moves the iterate; ρ
    then grows by ``growth`` per iteration. The loop stops once the iterate
    has moved and both its change and the block disagreement fall below
    ``tol``. With ``polish`` the result is refit without shrinkage at its own
    per-mode ranks and the refit kept if it reproduces the observed entries.
    """
    y.require_observed()
    weights = _check_weights(alphas, len(y.shape))
    if (rho is not None and rho <= 0) or growth < 1:
        raise ValidationError("halrtc needs rho > 0 and growth >= 1")
    if y.mask.all():
        return np.array(y.values)
    scale = float(np.sqrt(np.mean(y.values[y.mask] ** 2)))
    if scale == 0:
        return np.zeros(y.shape)
    obs = MaskedTensor(y.values / scale, y.mask)
    active = [n for n, a in enumerate(weights, start=1) if a > 0]
    x = np.array(obs.values)
    rho = initial_penalty(x, weights, active) if rho is None else float(rho)
    rho_max = rho * HALRTC_RHO_SPAN
    duals = {n: np.zeros(y.shape) for n in active}
    blocks: Dict[int, np.ndarray] = {}
    moved = False
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        for n in active:
            m, _ = svt(unfold(x + duals[n] / rho, n), weights[n - 1] / rho)
            blocks[n] = fold(m, n, y.shape)
        prev = x
        x = obs.clamp(sum(blocks[n] - duals[n] / rho for n in active) / len(active))
        for n in active:
            duals[n] = duals[n] - rho * (blocks[n] - x)
        rho = min(rho * growth, rho_max)
        norm_x = max(float(np.linalg.norm(x)), 1e-300)
        change = float(np.linalg.norm(x - prev)) / max(float(np.linalg.norm(prev)), 1e-300)
        primal = max(float(np.linalg.norm(blocks[n] - x)) for n in active) / norm_x
        moved = moved or change > 0
        logger.debug("halrtc iter %d change %.3e disagreement %.3e", it, change, primal)
        if moved and change < tol and primal < tol:
            converged = True
            break
    if not converged:
        logger.warning("halrtc stopped after %d iterations without meeting tol %.1e", it, tol)
    if polish:
        refined = _multilinear_polish(obs, x, active, tol)
        if refined is not None:
            x = refined
    logger.info("halrtc: %d iterations", it)
    return x * scale


def unrecoverable_slices(mask: np.ndarray) -> Dict[int, List[int]]:
    """Per mode (1-based), indices whose slice holds no observed entry."""
    out: Dict[int, List[int]] = {}
    for n in range(1, mask.ndim + 1):
        empty = np.flatnonzero(~unfold(mask.astype(np.float64), n).any(axis=1))
        if empty.size:
            out[n] = [int(i) for i in empty]
    return out


def wopt_value_and_gradient(
    y: MaskedTensor, factors: Sequence[np.ndarray], ridge: float = 0.0
) -> Tuple[float, List[np.ndarray]]:
    """f = ½‖mask ⊙ (Y − [[factors]])‖² + ½·ridge·Σ‖A_n‖² and its gradient with respect to each factor."""
    resid = np.where(y.mask, y.values - full_from_factors(factors), 0.0)
    grads = [-mttkrp(resid, factors, n) + ridge * f for n, f in enumerate(factors, start=1)]
    value = 0.5 * float(np.sum(resid**2))
    if ridge:
        value += 0.5 * ridge * sum(float(np.sum(f**2)) for f in factors)
    return value, grads


def _scaled_start(y: MaskedTensor, factors: List[np.ndarray]) -> List[np.ndarray]:
    """Unit columns rescaled by the least-squares weight of each rank-one term on the observed entries."""
    mats = []
    for f in factors:
        norms = np.linalg.norm(f, axis=0)
        mats.append(f / np.where(norms > 0, norms, 1.0))
    r = mats[0].shape[1]
    design = np.stack([full_from_factors([f[:, [j]] for f in mats])[y.mask] for j in range(r)], axis=1)
    lam = np.linalg.lstsq(design, y.values[y.mask], rcond=None)[0]
    root = np.abs(lam) ** (1.0 / len(mats))
    mats = [f * root for f in mats]
    mats[0] = mats[0] * np.where(lam < 0, -1.0, 1.0)
    return mats


def cp_wopt(y: MaskedTensor, r: int, *, seed: Optional[int] = None, max_iter: int = WOPT_MAX_ITER) -> KruskalTensor:
    """Weighted CP fit to the observed entries by L-BFGS-B on the stacked factor entries.

    Each start (HOSVD of the zero-filled data plus ``WOPT_RESTARTS`` seeded
    Gaussian ones, all rescaled to the observed entries) is first fit with a
    ridge term that keeps the factors bounded; the start with the lowest
    ridged objective is then refined with a negligible ridge. The refinement
    is kept only if it lowers the data misfit.
    """
    if r < 1:
        raise ValidationError(f"CP rank must be at least 1, got {r}")
    y.require_observed()
    shape = y.shape
    scale = float(np.linalg.norm(y.values[y.mask])) or 1.0
    obs = MaskedTensor(y.values / scale, y.mask)
    missing = unrecoverable_slices(y.mask)
    if missing:
        logger.warning("cp_wopt: slices with no observations cannot be recovered: %s", missing)
    sizes = [s * r for s in shape]
    offsets = np.cumsum([0] + sizes)

    def unpack(v: np.ndarray) -> List[np.ndarray]:
        return [v[offsets[n] : offsets[n + 1]].reshape(shape[n], r) for n in range(len(shape))]

    def pack(factors: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate([f.ravel() for f in factors])

    def solve(start: np.ndarray, ridge: float, ftol: float) -> scipy.optimize.OptimizeResult:
        def fun(v: np.ndarray) -> Tuple[float, np.ndarray]:
            f, grads = wopt_value_and_gradient(obs, unpack(v), ridge)
            return f, pack(grads)

        return scipy.optimize.minimize(
            fun, start, jac=True, method="L-BFGS-B", options={"maxiter": max_iter, "ftol": ftol, "gtol": 1e-12}
        )

    rng = np.random.default_rng(seed)
    starts = [init_factors(obs.values, r, "hosvd", seed)]
    starts += [[rng.standard_normal((s, r)) for s in shape] for _ in range(WOPT_RESTARTS)]
    best = None
    for k, start in enumerate(starts):
        res = solve(pack(_scaled_start(obs, start)), WOPT_RIDGE, 1e-12)
        logger.debug("cp_wopt start %d: ridged objective %.3e after %d iterations", k, res.fun, res.nit)
        if best is None or res.fun < best.fun:
            best = res
    rough = best.x
    rough_fit = wopt_value_and_gradient(obs, unpack(rough))[0]
    final = solve(rough, WOPT_POLISH_RIDGE, 1e-16)
    final_fit = wopt_value_and_gradient(obs, unpack(final.x))[0]
    v, fit = (final.x, final_fit) if final_fit <= rough_fit else (rough, rough_fit)
    factors = unpack(v)
    factors[0] = factors[0] * scale
    iterations = int(best.nit) + int(final.nit)
    logger.info("cp_wopt rank %d: %d iterations, objective %.3e (%s)", r, iterations, fit, final.message)
    return KruskalTensor.from_factors(
        factors,
        metadata={
            "method": "cp_wopt",
            "iterations": iterations,
            "objective": float(fit) * scale**2,
            "converged": bool(final.success),
            "starts": len(starts),
            "unrecoverable": missing,
        },
    )


def tucker_wopt(
    y: MaskedTensor, ranks: Sequence[int], *, tol: float = EM_TOL, max_iter: int = EM_MAX_ITER
) -> TuckerTensor:
    """Tucker completion by expectation-maximization: impute the missing entries
    from the current model, refit by HOOI, repeat."""
    y.require_observed()
    fill = float(y.values[y.mask].mean())
    x = np.where(y.mask, y.values, fill)
    model = hooi(x, ranks)
    trace = []
    for it in range(max_iter):
        approx = model.full()
        nxt = y.clamp(approx)
        change = float(np.linalg.norm(nxt - x)) / max(float(np.linalg.norm(x)), 1e-300)
        trace.append(change)
        x = nxt
        if change < tol:
            break
        model = hooi(x, ranks, init=model, max_iter=5)
    logger.info("tucker_wopt: %d EM steps, last change %.3e", len(trace), trace[-1])
    return TuckerTensor(
        core=model.core,
        factors=model.factors,
        metadata={"method": "tucker_wopt", "iterations": len(trace), "change_trace": trace},
    )
