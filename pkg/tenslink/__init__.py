__all__ = [
    "__version__",
    "DenseTensor",
    "KruskalTensor",
    "TuckerTensor",
    "MaskedTensor",
    "CifaModel",
    "TenslinkError",
]

__version__ = "0.1.0"

# Convenience imports
from .core.errors import TenslinkError  # noqa: E402,F401
from .core.tensor import DenseTensor  # noqa: E402,F401
from .decomp.models import KruskalTensor, TuckerTensor  # noqa: E402,F401
from .linked.cifa import CifaModel  # noqa: E402,F401
from .robust.models import MaskedTensor  # noqa: E402,F401
