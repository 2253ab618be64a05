from .cp import cp_als, cp_nonneg
from .models import KruskalTensor, TuckerTensor, full_from_factors, reconstruct_kruskal, reconstruct_tucker
from .tucker import hooi, hosvd, mode_singular_values
from .uniqueness import UniquenessReport, congruence_match, cp_uniqueness_check, kruskal_rank

__all__ = [
    "KruskalTensor",
    "TuckerTensor",
    "UniquenessReport",
    "congruence_match",
    "cp_als",
    "cp_nonneg",
    "cp_uniqueness_check",
    "full_from_factors",
    "hooi",
    "hosvd",
    "kruskal_rank",
    "mode_singular_values",
    "reconstruct_kruskal",
    "reconstruct_tucker",
]
