"""Little-endian binary codecs for tensors, masked tensors and fitted models.

Every payload is f64 in colexicographic (first index fastest) order.

  .tns   b"TNSLINK1" u32 N, N×u32 sizes, values
  .mtns  .tns payload, then ceil(∏I/8) bytes of little-bit-order packed mask
  .kdt   b"TNSLKDT1" u32 N, u32 R, N×u32 sizes, R weights, factors 1..N (I_n×R)
  .tkt   b"TNSLTKT1" u32 N, N×u32 sizes, N×u32 ranks, core, factors 1..N (I_n×R_n)
  .cif   b"TNSLCIF1" u32 K, u32 C, u32 T, u32 N (2 matrix, 3 tensor), common basis T×C,
         K residuals, then per block u32 side sizes, u32 individual rank, u32 side
         ranks (tensor only), followed by the block arrays
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..core.errors import TensorIOError
from ..decomp.models import KruskalTensor, TuckerTensor
from ..linked.cifa import CifaModel
from ..robust.models import MaskedTensor

TNS_MAGIC = b"TNSLINK1"
KDT_MAGIC = b"TNSLKDT1"
TKT_MAGIC = b"TNSLTKT1"
CIF_MAGIC = b"TNSLCIF1"

MAX_ORDER = 64
MAX_ELEMENTS = 1 << 40

PathLike = Union[str, Path]


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = memoryview(data)
        self.offset = 0

    def take(self, n: int, what: str) -> memoryview:
        end = self.offset + n
        if end > len(self.data):
            raise TensorIOError(
                f"truncated payload: {what} needs {n} bytes, {len(self.data) - self.offset} left",
                offset=self.offset,
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def magic(self, expected: bytes) -> None:
        got = bytes(self.take(len(expected), "magic"))
        if got != expected:
            raise TensorIOError(f"bad magic {got!r}, expected {expected!r}", offset=0)

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u32s(self, count: int, what: str) -> List[int]:
        return list(struct.unpack(f"<{count}I", self.take(4 * count, what)))

    def order(self) -> int:
        at = self.offset
        n = self.u32("order")
        if n == 0:
            raise TensorIOError("tensor order N=0 is not allowed", offset=at)
        if n > MAX_ORDER:
            raise TensorIOError(f"tensor order {n} exceeds {MAX_ORDER}", offset=at)
        return n

    def sizes(self, count: int, what: str) -> Tuple[int, ...]:
        at = self.offset
        sizes = tuple(self.u32s(count, what))
        if any(s == 0 for s in sizes):
            raise TensorIOError(f"{what} contain a zero extent: {sizes}", offset=at)
        total = 1
        for s in sizes:
            total *= s
            if total > MAX_ELEMENTS:
                raise TensorIOError(f"{what} {sizes} overflow the element limit", offset=at)
        return sizes

    def f64(self, shape: Sequence[int], what: str) -> np.ndarray:
        count = int(np.prod(shape)) if len(shape) else 1
        raw = self.take(8 * count, what)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(tuple(shape), order="F")

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise TensorIOError(f"{len(self.data) - self.offset} trailing bytes", offset=self.offset)


def _u32(*values: int) -> bytes:
    return struct.pack(f"<{len(values)}I", *values)


def _f64(arr: np.ndarray) -> bytes:
    return np.asarray(arr, dtype="<f8").tobytes(order="F")


def _check_order(shape: Sequence[int]) -> None:
    if len(shape) == 0:
        raise TensorIOError("cannot encode a 0-order tensor")


# -- dense tensors ----------------------------------------------------------


def encode_tensor(x: np.ndarray) -> bytes:
    x = np.asarray(x, dtype=np.float64)
    _check_order(x.shape)
    return TNS_MAGIC + _u32(x.ndim, *x.shape) + _f64(x)


def _read_tensor(reader: _Reader) -> np.ndarray:
    reader.magic(TNS_MAGIC)
    n = reader.order()
    shape = reader.sizes(n, "mode sizes")
    return reader.f64(shape, "tensor values")


def decode_tensor(data: bytes) -> np.ndarray:
    reader = _Reader(data)
    x = _read_tensor(reader)
    reader.finish()
    return x


# -- masked tensors ---------------------------------------------------------


def encode_masked(y: MaskedTensor) -> bytes:
    bits = np.packbits(y.mask.ravel(order="F"), bitorder="little")
    return encode_tensor(y.values) + bits.tobytes()


def decode_masked(data: bytes) -> MaskedTensor:
    reader = _Reader(data)
    values = _read_tensor(reader)
    raw = reader.take((values.size + 7) // 8, "mask block")
    reader.finish()
    flat = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=values.size, bitorder="little").astype(bool)
    return MaskedTensor(values, flat.reshape(values.shape, order="F"))


# -- models -----------------------------------------------------------------


def encode_kruskal(k: KruskalTensor) -> bytes:
    parts = [KDT_MAGIC, _u32(k.order, k.rank, *k.shape), _f64(k.weights)]
    parts.extend(_f64(f) for f in k.factors)
    return b"".join(parts)


def decode_kruskal(data: bytes) -> KruskalTensor:
    reader = _Reader(data)
    reader.magic(KDT_MAGIC)
    n = reader.order()
    r = reader.u32("rank")
    shape = reader.sizes(n, "mode sizes")
    weights = reader.f64((r,), "weights")
    factors = tuple(reader.f64((s, r), f"factor {i}") for i, s in enumerate(shape, start=1))
    reader.finish()
    return KruskalTensor(weights=weights, factors=factors)


def encode_tucker(t: TuckerTensor) -> bytes:
    n = len(t.factors)
    parts = [TKT_MAGIC, _u32(n, *t.shape, *t.ranks), _f64(t.core)]
    parts.extend(_f64(f) for f in t.factors)
    return b"".join(parts)


def decode_tucker(data: bytes) -> TuckerTensor:
    reader = _Reader(data)
    reader.magic(TKT_MAGIC)
    n = reader.order()
    shape = reader.sizes(n, "mode sizes")
    ranks = reader.sizes(n, "core ranks")
    core = reader.f64(ranks, "core")
    factors = tuple(reader.f64((s, r), f"factor {i}") for i, (s, r) in enumerate(zip(shape, ranks), start=1))
    reader.finish()
    return TuckerTensor(core=core, factors=factors)


def encode_cifa(model: CifaModel) -> bytes:
    t, c = model.common_basis.shape
    order = 3 if model.is_tensor else 2
    residuals = np.zeros(model.n_blocks)
    residuals[: len(model.residuals)] = model.residuals
    parts = [CIF_MAGIC, _u32(model.n_blocks, c, t, order), _f64(model.common_basis), _f64(residuals)]
    for k in range(model.n_blocks):
        ind = model.individual_bases[k]
        if model.is_tensor:
            side = model.side_factors[k]
            parts.append(_u32(*(f.shape[0] for f in side), ind.shape[1], *(f.shape[1] for f in side)))
            parts.extend(_f64(a) for a in (model.common_parts[k], model.individual_parts[k], ind, *side))
        else:
            parts.append(_u32(model.common_parts[k].shape[0], ind.shape[1]))
            parts.extend(_f64(a) for a in (model.common_parts[k], model.individual_parts[k], ind))
    return b"".join(parts)


def decode_cifa(data: bytes) -> CifaModel:
    reader = _Reader(data)
    reader.magic(CIF_MAGIC)
    k_blocks, c, t, order = reader.u32s(4, "cifa header")
    if order not in (2, 3):
        raise TensorIOError(f"cifa block order must be 2 or 3, got {order}", offset=reader.offset - 4)
    basis = reader.f64((t, c), "common basis")
    residuals = reader.f64((k_blocks,), "residuals")
    ind_bases, common_parts, ind_parts, sides = [], [], [], []
    for k in range(k_blocks):
        if order == 3:
            i2, i3, r_ind, r2, r3 = reader.u32s(5, f"block {k} header")
            common_parts.append(reader.f64((c, r2, r3), f"block {k} common core"))
            ind_parts.append(reader.f64((r_ind, r2, r3), f"block {k} individual core"))
            ind_bases.append(reader.f64((t, r_ind), f"block {k} individual basis"))
            sides.append((reader.f64((i2, r2), f"block {k} mode-2 factor"), reader.f64((i3, r3), f"block {k} mode-3 factor")))
        else:
            rows, r_ind = reader.u32s(2, f"block {k} header")
            common_parts.append(reader.f64((rows, c), f"block {k} common loadings"))
            ind_parts.append(reader.f64((rows, r_ind), f"block {k} individual loadings"))
            ind_bases.append(reader.f64((t, r_ind), f"block {k} individual basis"))
    reader.finish()
    return CifaModel(
        common_basis=basis,
        individual_bases=tuple(ind_bases),
        common_parts=tuple(common_parts),
        individual_parts=tuple(ind_parts),
        side_factors=tuple(sides),
        residuals=tuple(float(r) for r in residuals),
    )


# -- files ------------------------------------------------------------------


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise TensorIOError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_bytes(path: PathLike, payload: bytes) -> None:
    try:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(payload)
    except OSError as exc:
        raise TensorIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _decode_file(path: PathLike, decode):
    try:
        return decode(_read_bytes(path))
    except TensorIOError as exc:
        err = TensorIOError(f"{path}: {exc}")
        err.offset = exc.offset
        raise err from exc


def read_tensor(path: PathLike) -> np.ndarray:
    return _decode_file(path, decode_tensor)


def write_tensor(path: PathLike, x: np.ndarray) -> None:
    _write_bytes(path, encode_tensor(x))


def read_masked(path: PathLike) -> MaskedTensor:
    return _decode_file(path, decode_masked)


def write_masked(path: PathLike, y: MaskedTensor) -> None:
    _write_bytes(path, encode_masked(y))


def read_kruskal(path: PathLike) -> KruskalTensor:
    return _decode_file(path, decode_kruskal)


def write_kruskal(path: PathLike, k: KruskalTensor) -> None:
    _write_bytes(path, encode_kruskal(k))


def read_tucker(path: PathLike) -> TuckerTensor:
    return _decode_file(path, decode_tucker)


def write_tucker(path: PathLike, t: TuckerTensor) -> None:
    _write_bytes(path, encode_tucker(t))


def read_cifa(path: PathLike) -> CifaModel:
    return _decode_file(path, decode_cifa)


def write_cifa(path: PathLike, model: CifaModel) -> None:
    _write_bytes(path, encode_cifa(model))
