from .blocks import (
    JointBSSResult,
    MultiBlockSet,
    PVDResult,
    TensorICAResult,
    concat_vertical,
    joint_bss,
    pvd,
    split_vertical,
    tensor_ica_fit,
    tensor_ica_unfolding,
)
from .cifa import CifaModel, cifa_matrix, cifa_tucker, cobe, cobe_residual_curve
from .mcca import CCAResult, MCCAResult, cca, mcca_maxvar
from .mlcca import CanonicalPair, PLSModel, hopls_fit, hopls_predict, mlcca, mlpls_fit

__all__ = [
    "CCAResult",
    "CanonicalPair",
    "CifaModel",
    "JointBSSResult",
    "MCCAResult",
    "MultiBlockSet",
    "PLSModel",
    "PVDResult",
    "TensorICAResult",
    "cca",
    "cifa_matrix",
    "cifa_tucker",
    "cobe",
    "cobe_residual_curve",
    "concat_vertical",
    "hopls_fit",
    "hopls_predict",
    "joint_bss",
    "mcca_maxvar",
    "mlcca",
    "mlpls_fit",
    "pvd",
    "split_vertical",
    "tensor_ica_fit",
    "tensor_ica_unfolding",
]
