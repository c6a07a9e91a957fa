"""Standalone writer: byte layout and validation, verified with struct."""

import struct

import numpy as np
import pytest

from actd_capture import (
    DTYPE_F32,
    DTYPE_F64,
    KIND_ACTIVATION,
    KIND_WEIGHT,
    CapturedRecord,
    WriteError,
    write_actd_file,
)

HEADER = struct.Struct("<4sHHI")


def record(name="t", shape=(2, 2), kind=KIND_ACTIVATION, dtype=np.float64):
    matrix = np.arange(shape[0] * shape[1], dtype=dtype).reshape(shape) + 0.5
    return CapturedRecord(name=name, kind=kind, matrix=matrix)


class TestLayout:
    def test_empty_file_is_header_only(self, tmp_path):
        path = tmp_path / "empty.actd"
        assert write_actd_file([], path) == 12
        assert HEADER.unpack(path.read_bytes()) == (b"ACTD", 1, 0, 0)

    def test_f64_record_byte_accounting(self, tmp_path):
        path = tmp_path / "one.actd"
        # 12 header + 2 name len + 1 name + 6 metadata + 4 dims + 32 payload
        assert write_actd_file([record()], path) == 57

    def test_f32_record_byte_accounting(self, tmp_path):
        path = tmp_path / "one.actd"
        assert write_actd_file([record(dtype=np.float32)], path) == 41

    def test_record_fields_and_payload(self, tmp_path):
        path = tmp_path / "w.actd"
        matrix = np.array([[1.5, -2.0, 3.0], [0.25, 8.0, -1.0]], dtype=np.float32)
        write_actd_file(
            [CapturedRecord(name="layer.0.k_proj", kind=KIND_WEIGHT, matrix=matrix)],
            path,
        )
        data = path.read_bytes()
        (name_len,) = struct.unpack_from("<H", data, 12)
        assert name_len == 14
        assert data[14:28] == b"layer.0.k_proj"
        dtype_code, kind_code, rows, cols = struct.unpack_from("<BBII", data, 28)
        assert (dtype_code, kind_code, rows, cols) == (DTYPE_F32, KIND_WEIGHT, 2, 3)
        np.testing.assert_array_equal(
            np.frombuffer(data[38:], dtype="<f4").reshape(2, 3), matrix
        )

    def test_record_order_preserved(self, tmp_path):
        path = tmp_path / "two.actd"
        write_actd_file([record("b"), record("a")], path)
        data = path.read_bytes()
        assert data.index(b"b") < data.index(b"a")


class TestValidation:
    def test_duplicate_name_kind_rejected(self, tmp_path):
        with pytest.raises(WriteError, match="duplicate"):
            write_actd_file([record("x"), record("x")], tmp_path / "d.actd")

    def test_same_name_other_kind_allowed(self, tmp_path):
        count = write_actd_file(
            [record("x"), record("x", kind=KIND_WEIGHT)], tmp_path / "d.actd"
        )
        assert count == 12 + 2 * 45

    def test_non_finite_rejected(self, tmp_path):
        bad = CapturedRecord(
            name="n", kind=KIND_ACTIVATION, matrix=np.array([[np.nan]])
        )
        with pytest.raises(WriteError, match="non-finite"):
            write_actd_file([bad], tmp_path / "n.actd")

    def test_zero_dimension_rejected(self, tmp_path):
        bad = CapturedRecord(
            name="z", kind=KIND_ACTIVATION, matrix=np.zeros((0, 4))
        )
        with pytest.raises(WriteError, match="zero-sized"):
            write_actd_file([bad], tmp_path / "z.actd")

    def test_non_2d_rejected(self, tmp_path):
        bad = CapturedRecord(
            name="v", kind=KIND_ACTIVATION, matrix=np.zeros(4)
        )
        with pytest.raises(WriteError, match="2-D"):
            write_actd_file([bad], tmp_path / "v.actd")

    def test_unsupported_dtype_rejected(self, tmp_path):
        bad = CapturedRecord(
            name="i", kind=KIND_ACTIVATION, matrix=np.ones((2, 2), dtype=np.int32)
        )
        with pytest.raises(WriteError, match="dtype"):
            write_actd_file([bad], tmp_path / "i.actd")

    def test_unknown_kind_rejected(self, tmp_path):
        bad = CapturedRecord(name="k", kind=7, matrix=np.ones((1, 1)))
        with pytest.raises(WriteError, match="kind"):
            write_actd_file([bad], tmp_path / "k.actd")

    def test_oversized_name_rejected(self, tmp_path):
        with pytest.raises(WriteError, match="name too long"):
            write_actd_file([record("x" * 70000)], tmp_path / "l.actd")
