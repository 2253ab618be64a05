from .completion import cp_wopt, halrtc, soft_impute, tucker_wopt, unrecoverable_slices, wopt_value_and_gradient
from .denoise import estimate_noise_sigma, hosvd_hard_threshold, patch_denoise
from .metrics import psnr, rrse
from .models import MaskedTensor, RobustDecomposition
from .rank_adapt import cp_rank_adapt
from .rpca import rpca

__all__ = [
    "MaskedTensor",
    "RobustDecomposition",
    "cp_rank_adapt",
    "cp_wopt",
    "estimate_noise_sigma",
    "halrtc",
    "hosvd_hard_threshold",
    "patch_denoise",
    "psnr",
    "rpca",
    "rrse",
    "soft_impute",
    "tucker_wopt",
    "unrecoverable_slices",
    "wopt_value_and_gradient",
]
