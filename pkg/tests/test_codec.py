import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from tenslink.core.errors import TensorIOError
from tenslink.linked import cifa_matrix, cifa_tucker
from tenslink.persistence import codec
from tenslink.pipelines.synth import masked, planted_cp, planted_tucker


class TestDenseTensor:
    def test_roundtrip_is_bitwise(self, rng):
        x = rng.standard_normal((3, 4, 2, 2))
        payload = codec.encode_tensor(x)
        back = codec.decode_tensor(payload)
        assert_array_equal(back, x)
        assert codec.encode_tensor(back) == payload

    def test_layout_is_first_index_fastest(self):
        x = np.arange(6.0).reshape(2, 3)
        payload = codec.encode_tensor(x)
        assert payload[:8] == codec.TNS_MAGIC
        assert struct.unpack("<3I", payload[8:20]) == (2, 2, 3)
        values = struct.unpack("<6d", payload[20:])
        assert values == (0.0, 3.0, 1.0, 4.0, 2.0, 5.0)

    def test_truncated_payload_reports_offset(self, rng):
        payload = codec.encode_tensor(rng.standard_normal((4, 4)))
        with pytest.raises(TensorIOError) as info:
            codec.decode_tensor(payload[:-3])
        assert info.value.offset == 20

    def test_truncated_header(self):
        with pytest.raises(TensorIOError) as info:
            codec.decode_tensor(codec.TNS_MAGIC + b"\x02\x00")
        assert info.value.offset == 8

    def test_bad_magic(self, rng):
        payload = codec.encode_tensor(rng.standard_normal(3))
        with pytest.raises(TensorIOError, match="magic"):
            codec.decode_tensor(b"XXXXXXXX" + payload[8:])

    def test_zero_order_rejected(self):
        with pytest.raises(TensorIOError, match="N=0"):
            codec.decode_tensor(codec.TNS_MAGIC + struct.pack("<I", 0))

    def test_zero_extent_rejected(self):
        with pytest.raises(TensorIOError, match="zero extent"):
            codec.decode_tensor(codec.TNS_MAGIC + struct.pack("<3I", 2, 3, 0))

    def test_overflowing_sizes_rejected(self):
        header = codec.TNS_MAGIC + struct.pack("<4I", 3, 2**20, 2**20, 2**20)
        with pytest.raises(TensorIOError, match="overflow"):
            codec.decode_tensor(header)

    def test_trailing_bytes_rejected(self, rng):
        payload = codec.encode_tensor(rng.standard_normal(2))
        with pytest.raises(TensorIOError, match="trailing"):
            codec.decode_tensor(payload + b"\x00")

    def test_cannot_encode_scalar(self):
        with pytest.raises(TensorIOError):
            codec.encode_tensor(np.float64(1.0))


class TestMaskedTensor:
    def test_roundtrip(self, rng):
        y = masked(rng.standard_normal((5, 3, 3)), 0.4, seed=2)
        payload = codec.encode_masked(y)
        back = codec.decode_masked(payload)
        assert_array_equal(back.mask, y.mask)
        assert_array_equal(back.values, y.values)
        assert codec.encode_masked(back) == payload

    def test_mask_block_size(self, rng):
        y = masked(rng.standard_normal((3, 3)), 0.5, seed=0)
        assert len(codec.encode_masked(y)) == len(codec.encode_tensor(y.values)) + 2

    def test_missing_mask_block(self, rng):
        y = masked(rng.standard_normal((3, 3)), 0.5, seed=0)
        with pytest.raises(TensorIOError, match="mask"):
            codec.decode_masked(codec.encode_tensor(y.values))


class TestModels:
    def test_kruskal_roundtrip(self):
        k = planted_cp((4, 3, 5), 2, seed=3)
        payload = codec.encode_kruskal(k)
        back = codec.decode_kruskal(payload)
        assert_array_equal(back.weights, k.weights)
        for a, b in zip(back.factors, k.factors):
            assert_array_equal(a, b)
        assert codec.encode_kruskal(back) == payload

    def test_tucker_roundtrip(self):
        t = planted_tucker((5, 4, 3), (2, 3, 1), seed=1)
        payload = codec.encode_tucker(t)
        back = codec.decode_tucker(payload)
        assert_array_equal(back.core, t.core)
        assert codec.encode_tucker(back) == payload

    def test_cifa_matrix_roundtrip(self, rng):
        blocks = [rng.standard_normal((6, 30)) for _ in range(3)]
        model = cifa_matrix(blocks, 1, 3)
        payload = codec.encode_cifa(model)
        back = codec.decode_cifa(payload)
        assert_array_equal(back.common_basis, model.common_basis)
        assert not back.is_tensor
        assert back.residuals == model.residuals
        assert codec.encode_cifa(back) == payload

    def test_cifa_tucker_roundtrip(self, rng):
        blocks = [rng.standard_normal((8, 4, 3)) for _ in range(2)]
        model = cifa_tucker(blocks, 1, (3, 2, 2))
        payload = codec.encode_cifa(model)
        back = codec.decode_cifa(payload)
        assert back.is_tensor
        for a, b in zip(back.side_factors[1], model.side_factors[1]):
            assert_array_equal(a, b)
        assert codec.encode_cifa(back) == payload

    def test_wrong_model_magic(self):
        payload = codec.encode_tucker(planted_tucker((3, 3), (1, 1)))
        with pytest.raises(TensorIOError, match="magic"):
            codec.decode_kruskal(payload)


class TestFiles:
    def test_file_roundtrip(self, tmp_path, rng):
        x = rng.standard_normal((2, 3))
        path = tmp_path / "nested" / "x.tns"
        codec.write_tensor(path, x)
        assert_array_equal(codec.read_tensor(path), x)

    def test_missing_file(self, tmp_path):
        with pytest.raises(TensorIOError, match="cannot read"):
            codec.read_tensor(tmp_path / "absent.tns")

    def test_file_errors_name_the_path(self, tmp_path):
        path = tmp_path / "short.tns"
        path.write_bytes(codec.TNS_MAGIC + b"\x01")
        with pytest.raises(TensorIOError, match="short.tns") as info:
            codec.read_tensor(path)
        assert info.value.offset == 8
