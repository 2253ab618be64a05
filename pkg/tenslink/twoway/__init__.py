from .factorization import FactorMatch, TwoWayFactorization, column_congruence
from .nmf import nmf
from .pca import pca
from .smca import smca
from .sobi import amari_index, blind_identify, cumulant_tensor, lagged_covariances

__all__ = [
    "FactorMatch",
    "TwoWayFactorization",
    "amari_index",
    "blind_identify",
    "column_congruence",
    "cumulant_tensor",
    "lagged_covariances",
    "nmf",
    "pca",
    "smca",
]
