"""Minimal standalone ACTD v1 writer.

Layout (all integers little-endian):

    header: magic "ACTD" | version u16 = 1 | flags u16 = 0 | count u32
    record: name_len u16 | name UTF-8 | dtype u8 | kind u8
            | rows u32 | cols u32 | row-major payload

dtype codes: 0 = F32, 1 = F64. kind codes: 0 = activation, 1 = weight.
Record order is preserved; (name, kind) pairs must be unique; every
payload value must be finite. Files produced here are canonical — any
compliant reader round-trips them byte-identically.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"ACTD"
VERSION = 1

DTYPE_F32 = 0
DTYPE_F64 = 1
KIND_ACTIVATION = 0
KIND_WEIGHT = 1

_HEADER = struct.Struct("<4sHHI")
_NAME_LEN = struct.Struct("<H")
_REC_META = struct.Struct("<BBII")

_DTYPE_CODES = {
    np.dtype(np.float32): DTYPE_F32,
    np.dtype(np.float64): DTYPE_F64,
}


class WriteError(ValueError):
    """A record cannot be represented in the container format."""


@dataclass(frozen=True)
class CapturedRecord:
    """One matrix headed for an ACTD file.

    Attributes:
        name: Record name, e.g. ``layer.0.down_proj``.
        kind: ``KIND_ACTIVATION`` or ``KIND_WEIGHT``.
        matrix: 2-D float32 or float64 array; the dtype chooses the
            on-disk precision.
    """

    name: str
    kind: int
    matrix: np.ndarray


def _validate(record: CapturedRecord, index: int) -> np.ndarray:
    label = f"record {index} ({record.name!r})"
    if record.kind not in (KIND_ACTIVATION, KIND_WEIGHT):
        raise WriteError(f"{label} has unknown kind code {record.kind}")
    matrix = np.asarray(record.matrix)
    if matrix.dtype not in _DTYPE_CODES:
        raise WriteError(
            f"{label} has dtype {matrix.dtype}; only float32/float64 are storable"
        )
    if matrix.ndim != 2:
        raise WriteError(f"{label} must be 2-D, got shape {matrix.shape}")
    rows, cols = matrix.shape
    if rows == 0 or cols == 0:
        raise WriteError(f"{label} has zero-sized shape ({rows}, {cols})")
    if rows > 0xFFFFFFFF or cols > 0xFFFFFFFF:
        raise WriteError(f"{label} dimensions exceed u32")
    if not np.isfinite(matrix).all():
        raise WriteError(f"{label} contains non-finite values")
    return np.ascontiguousarray(matrix)


def write_actd_file(records: list[CapturedRecord], path: str | Path) -> int:
    """Serialize ``records`` to ``path``; return the byte count written."""
    seen: set[tuple[str, int]] = set()
    chunks = [_HEADER.pack(MAGIC, VERSION, 0, len(records))]
    for index, record in enumerate(records):
        key = (record.name, record.kind)
        if key in seen:
            raise WriteError(
                f"duplicate record {record.name!r} with kind code {record.kind}"
            )
        seen.add(key)
        matrix = _validate(record, index)
        name_bytes = record.name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise WriteError(f"record name too long ({len(name_bytes)} bytes)")
        rows, cols = matrix.shape
        chunks.append(_NAME_LEN.pack(len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(
            _REC_META.pack(_DTYPE_CODES[matrix.dtype], record.kind, rows, cols)
        )
        # "<" layouts are little-endian; make the payload match regardless
        # of the host byte order.
        chunks.append(matrix.astype(matrix.dtype.newbyteorder("<"), copy=False).tobytes())
    blob = b"".join(chunks)
    Path(path).write_bytes(blob)
    return len(blob)
