from .errors import ConvergenceError, IdentifiabilityError, TenslinkError, TensorIOError, ValidationError
from .registry import Method, MethodRegistry

__all__ = [
    "ConvergenceError",
    "IdentifiabilityError",
    "Method",
    "MethodRegistry",
    "TenslinkError",
    "TensorIOError",
    "ValidationError",
]
