"""Dense N-way tensors and the multilinear algebra everything else builds on.

In memory a tensor is a numpy array. Its flat layout is colexicographic (first
index fastest), i.e. numpy's Fortran order, and every unfolding, codec and
``DenseTensor.data`` view follows it. Mode arguments of the public functions
are 1-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import ValidationError


ArrayLike = Union[np.ndarray, Sequence, "DenseTensor"]


@dataclass(frozen=True)
class DenseTensor:
    """Immutable real N-way array."""

    array: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.array, dtype=np.float64, copy=True)
        if arr.ndim == 0:
            raise ValidationError("a tensor needs at least one mode")
        if any(s < 1 for s in arr.shape):
            raise ValidationError(f"mode sizes must be positive, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)

    @classmethod
    def from_data(cls, shape: Sequence[int], data: Sequence[float]) -> "DenseTensor":
        shape = tuple(int(s) for s in shape)
        flat = np.asarray(data, dtype=np.float64).ravel()
        if flat.size != math.prod(shape):
            raise ValidationError(
                f"data length {flat.size} does not match shape {shape} (needs {math.prod(shape)})"
            )
        return cls(flat.reshape(shape, order="F"))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.array.shape

    @property
    def order(self) -> int:
        return self.array.ndim

    @property
    def data(self) -> np.ndarray:
        """Flat colexicographic view of the entries."""
        return self.array.ravel(order="F")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.array)))


@dataclass(frozen=True)
class ObservationMask:
    """Boolean observation pattern paired with a tensor (True = observed)."""

    flags: np.ndarray

    def __post_init__(self) -> None:
        flags = np.array(self.flags, dtype=bool, copy=True)
        if flags.ndim == 0:
            raise ValidationError("a mask needs at least one mode")
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.flags.shape

    @property
    def observed_count(self) -> int:
        return int(self.flags.sum())

    @property
    def observed_fraction(self) -> float:
        return self.observed_count / self.flags.size


def as_array(x: ArrayLike) -> np.ndarray:
    if isinstance(x, DenseTensor):
        return x.array
    return np.asarray(x, dtype=np.float64)


def _check_mode(ndim: int, mode: int) -> int:
    if not 1 <= mode <= ndim:
        raise ValidationError(f"mode {mode} out of range for an order-{ndim} tensor")
    return mode - 1


def unfold(x: ArrayLike, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization: columns are the mode fibers, remaining
    indices ordered colexicographically."""
    arr = as_array(x)
    n = _check_mode(arr.ndim, mode)
    rest = math.prod(s for p, s in enumerate(arr.shape) if p != n)
    return np.reshape(np.moveaxis(arr, n, 0), (arr.shape[n], rest), order="F")


def fold(m: ArrayLike, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    mat = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    n = _check_mode(len(shape), mode)
    rest = math.prod(shape) // shape[n] if shape[n] else 0
    if mat.ndim != 2 or mat.shape != (shape[n], rest):
        raise ValidationError(
            f"cannot fold a {mat.shape} matrix along mode {mode} into shape {shape}"
        )
    full = (shape[n],) + tuple(s for p, s in enumerate(shape) if p != n)
    return np.moveaxis(np.reshape(mat, full, order="F"), 0, n)


def mode_n_product(x: ArrayLike, b: ArrayLike, mode: int) -> np.ndarray:
    """``x ×_mode b`` for a J×I_mode matrix ``b``."""
    arr = as_array(x)
    mat = np.atleast_2d(np.asarray(b, dtype=np.float64))
    n = _check_mode(arr.ndim, mode)
    if mat.shape[1] != arr.shape[n]:
        raise ValidationError(
            f"mode-{mode} product needs {arr.shape[n]} matrix columns, got {mat.shape[1]}"
        )
    shape = list(arr.shape)
    shape[n] = mat.shape[0]
    return fold(mat @ unfold(arr, mode), mode, shape)


def multi_mode_product(
    x: ArrayLike, matrices: Sequence[np.ndarray], *, skip: int | None = None, transpose: bool = False
) -> np.ndarray:
    """Apply one matrix per mode (1-based ``skip`` leaves that mode alone)."""
    out = as_array(x)
    for n, mat in enumerate(matrices, start=1):
        if n == skip or mat is None:
            continue
        out = mode_n_product(out, mat.T if transpose else mat, n)
    return out


def khatri_rao(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Column-wise Kronecker product."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}")
    return np.einsum("ir,jr->ijr", a, b).reshape(a.shape[0] * b.shape[0], a.shape[1])


def khatri_rao_chain(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """``m_0 ⊙ m_1 ⊙ ... ⊙ m_k``."""
    if not matrices:
        raise ValidationError("khatri_rao_chain needs at least one matrix")
    return reduce(khatri_rao, matrices)


def kronecker(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    return np.kron(np.atleast_2d(np.asarray(a, dtype=np.float64)), np.atleast_2d(np.asarray(b, dtype=np.float64)))


def outer_rank1(vectors: Iterable[ArrayLike]) -> np.ndarray:
    vecs = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    if not vecs or any(v.size == 0 for v in vecs):
        raise ValidationError("outer_rank1 needs nonempty vectors")
    return reduce(np.multiply.outer, vecs)


def frobenius_norm(x: ArrayLike) -> float:
    return float(np.linalg.norm(as_array(x).ravel()))


def stack_blocks(blocks: Sequence[ArrayLike]) -> np.ndarray:
    """Stack same-shape blocks along a new trailing mode."""
    arrays = [as_array(b) for b in blocks]
    if not arrays:
        raise ValidationError("stack_blocks needs at least one block")
    shape = arrays[0].shape
    for k, arr in enumerate(arrays):
        if arr.shape != shape:
            raise ValidationError(f"block {k} has shape {arr.shape}, expected {shape}")
    return np.stack(arrays, axis=-1)


def canonical_signs(factor: np.ndarray) -> np.ndarray:
    """Per-column signs making each column's largest-magnitude entry positive."""
    if factor.size == 0:
        return np.ones(factor.shape[1] if factor.ndim == 2 else 0)
    idx = np.argmax(np.abs(factor), axis=0)
    signs = np.sign(factor[idx, np.arange(factor.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def leading_left_singular_vectors(m: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    """Top ``r`` left singular vectors (sign-canonical) and all singular values."""
    u, s, _ = np.linalg.svd(m, full_matrices=r > min(m.shape))
    u = u[:, :r]
    return u * canonical_signs(u), s


def pinv(m: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """SVD pseudo-inverse; singular values below ``rcond·σ_max`` count as zero."""
    return np.linalg.pinv(m, rcond=rcond)
