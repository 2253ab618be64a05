"""Solver registries the CLI dispatches over."""
from __future__ import annotations

from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ValidationError
from ..core.registry import MethodRegistry
from ..core.schemas import RunConfig
from ..decomp import cp_als, cp_nonneg, hooi, hosvd
from ..decomp.models import KruskalTensor, TuckerTensor
from ..linked.cifa import CifaModel, cifa_matrix, cifa_tucker
from ..robust import cp_rank_adapt, cp_wopt, halrtc, soft_impute, tucker_wopt
from ..robust.models import MaskedTensor
from ..twoway import blind_identify, nmf, pca, smca
from ..twoway.factorization import TwoWayFactorization

Model = Union[KruskalTensor, TuckerTensor, CifaModel]

DECOMPOSERS = MethodRegistry("decompose")
COMPLETERS = MethodRegistry("complete")


def relative_fit(x: np.ndarray, approx: np.ndarray) -> float:
    nx = float(np.linalg.norm(x))
    return 1.0 - float(np.linalg.norm(x - approx)) / (nx or 1.0)


def _need_rank(cfg: RunConfig) -> int:
    if cfg.rank is None:
        raise ValidationError(f"--method {cfg.method} needs --rank")
    return cfg.rank


def _need_ranks(cfg: RunConfig, shape: Sequence[int]) -> List[int]:
    if cfg.ranks is None:
        raise ValidationError(f"--method {cfg.method} needs --ranks")
    if cfg.ranks == "full":
        return list(shape)
    if len(cfg.ranks) != len(shape):
        raise ValidationError(f"{len(cfg.ranks)} ranks given for an order-{len(shape)} tensor")
    return list(cfg.ranks)


def _single(data: Sequence[np.ndarray], method: str) -> np.ndarray:
    if len(data) != 1:
        raise ValidationError(f"{method} takes exactly one input tensor")
    return data[0]


def _matrix(data: Sequence[np.ndarray], method: str) -> np.ndarray:
    x = _single(data, method)
    if x.ndim != 2:
        raise ValidationError(f"{method} factorizes matrices, got an order-{x.ndim} tensor")
    return x


def _cp_metrics(x: np.ndarray, k: KruskalTensor) -> Dict[str, float]:
    metrics = {"fit": relative_fit(x, k.full()), "rank": float(k.rank)}
    if "iterations" in k.metadata:
        metrics["iterations"] = float(k.metadata["iterations"])
    return metrics


def _two_way(x: np.ndarray, fact: TwoWayFactorization) -> Tuple[KruskalTensor, Dict[str, float]]:
    k = KruskalTensor.from_factors([fact.mixing, fact.sources], metadata={"method": fact.method})
    return k, {"fit": relative_fit(x, fact.reconstruct()), "rank": float(fact.rank)}


@DECOMPOSERS.add("cp", "CP by alternating least squares (--rank)")
def _cp(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _single(data, "cp")
    k = cp_als(x, _need_rank(cfg), seed=cfg.seed)
    return k, _cp_metrics(x, k)


@DECOMPOSERS.add("ncp", "nonnegative CP by hierarchical ALS (--rank)")
def _ncp(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _single(data, "ncp")
    k = cp_nonneg(x, _need_rank(cfg), seed=cfg.seed)
    return k, _cp_metrics(x, k)


@DECOMPOSERS.add("hosvd", "truncated higher-order SVD (--ranks or --ranks full)")
def _hosvd(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _single(data, "hosvd")
    t = hosvd(x, _need_ranks(cfg, x.shape))
    return t, {"fit": relative_fit(x, t.full()), "truncation_bound": float(t.metadata["truncation_bound"])}


@DECOMPOSERS.add("hooi", "Tucker by higher-order orthogonal iteration (--ranks)")
def _hooi(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _single(data, "hooi")
    t = hooi(x, _need_ranks(cfg, x.shape))
    return t, {"fit": relative_fit(x, t.full()), "iterations": float(len(t.metadata["fit_trace"]))}


@DECOMPOSERS.add("pca", "truncated SVD of a matrix (--rank)")
def _pca(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _matrix(data, "pca")
    return _two_way(x, pca(x, _need_rank(cfg)))


@DECOMPOSERS.add("nmf", "nonnegative matrix factorization (--rank, --lam sparsity)")
def _nmf(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _matrix(data, "nmf")
    return _two_way(x, nmf(x, _need_rank(cfg), sparsity=cfg.lam or 0.0, seed=cfg.seed))


@DECOMPOSERS.add("smca", "smooth component analysis (--rank, --lam smoothness)")
def _smca(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _matrix(data, "smca")
    return _two_way(x, smca(x, _need_rank(cfg), gamma2=cfg.lam or 0.0))


@DECOMPOSERS.add("sobi", "second-order blind identification (--rank, --lags)")
def _sobi(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    x = _matrix(data, "sobi")
    return _two_way(x, blind_identify(x, _need_rank(cfg), cfg.lags))


@DECOMPOSERS.add("cifa", "common/individual features of linked blocks (--common, --rank or --ranks)", multi=True)
def _cifa(data: Sequence[np.ndarray], cfg: RunConfig) -> Tuple[Model, Dict[str, float]]:
    if len(data) < 2:
        raise ValidationError("cifa needs at least two linked input blocks")
    if cfg.common is None:
        raise ValidationError("cifa needs --common")
    orders = {x.ndim for x in data}
    if orders == {2}:
        model = cifa_matrix(data, cfg.common, _need_rank(cfg), seed=cfg.seed)
    elif orders == {3}:
        model = cifa_tucker(data, cfg.common, _need_ranks(cfg, data[0].shape))
    else:
        raise ValidationError(f"cifa blocks must all be matrices or all third-order, got orders {sorted(orders)}")
    metrics = {f"fit/{k + 1}": 1.0 - r for k, r in enumerate(model.residuals)}
    metrics["common"] = float(model.n_common)
    return model, metrics


@COMPLETERS.add("halrtc", "sum-of-nuclear-norms completion by ADMM")
def _halrtc(y: MaskedTensor, cfg: RunConfig) -> np.ndarray:
    return halrtc(y)


@COMPLETERS.add("soft-impute", "matrix nuclear-norm completion (--tau)")
def _soft_impute(y: MaskedTensor, cfg: RunConfig) -> np.ndarray:
    return soft_impute(y, cfg.tau)


@COMPLETERS.add("cp-wopt", "weighted CP by L-BFGS (--rank)")
def _cp_wopt(y: MaskedTensor, cfg: RunConfig) -> np.ndarray:
    return cp_wopt(y, _need_rank(cfg), seed=cfg.seed).full()


@COMPLETERS.add("cp-rank-adapt", "rank-adaptive robust CP (--rank is the starting rank)")
def _cp_rank_adapt(y: MaskedTensor, cfg: RunConfig) -> np.ndarray:
    model, _ = cp_rank_adapt(y, _need_rank(cfg), seed=cfg.seed)
    return model.full()


@COMPLETERS.add("tucker-wopt", "Tucker completion by EM imputation (--ranks)")
def _tucker_wopt(y: MaskedTensor, cfg: RunConfig) -> np.ndarray:
    return tucker_wopt(y, _need_ranks(cfg, y.shape)).full()


def describe() -> Dict[str, Any]:
    return {"decompose": DECOMPOSERS.names(), "complete": COMPLETERS.names()}
