"""ACTD v1: a bit-exact binary container for activation/weight matrices.

Layout (all integers little-endian):

    Header:  magic "ACTD" (4 bytes) · u16 version = 1 · u16 flags = 0 ·
             u32 record_count
    Record:  u16 name_len · name (UTF-8) · u8 dtype (0 = binary32,
             1 = binary64) · u8 kind (0 = activation, 1 = weight) ·
             u32 rows · u32 cols · payload rows×cols values, row-major,
             IEEE-754 little-endian

Serialization is canonical: writing, reading, and writing again produces
identical bytes. The reader validates everything and raises a distinct
:class:`~smoothrot.exceptions.ActdError` subclass per failure mode — it
never crashes on arbitrary bytes.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .exceptions import (
    BadMagicError,
    DuplicateRecordError,
    InvalidRecordError,
    NonFinitePayloadError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .validation import check_matrix

__all__ = [
    "MAGIC",
    "VERSION",
    "Dtype",
    "RecordKind",
    "LayerRecord",
    "write_actd",
    "read_actd",
]

MAGIC = b"ACTD"
VERSION = 1

_HEADER = struct.Struct("<4sHHI")
_NAME_LEN = struct.Struct("<H")
_REC_META = struct.Struct("<BBII")


class Dtype(enum.Enum):
    """On-disk payload precision."""

    F32 = 0
    F64 = 1

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype("<f4") if self is Dtype.F32 else np.dtype("<f8")


class RecordKind(enum.Enum):
    ACTIVATION = 0
    WEIGHT = 1


@dataclass
class LayerRecord:
    """A named matrix: activations (tokens × channels) or weights
    (in_channels × out_channels), both in the X @ W orientation.

    Names follow the dot-separated ``layer.<i>.<module>`` convention so
    downstream filtering can match on suffixes like ``*.down_proj``.
    """

    name: str
    kind: RecordKind
    matrix: np.ndarray
    dtype_stored: Dtype = field(default=Dtype.F64)

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise InvalidRecordError("record name must be a nonempty string")
        if not isinstance(self.kind, RecordKind):
            raise InvalidRecordError(f"kind must be a RecordKind, got {self.kind!r}")
        if not isinstance(self.dtype_stored, Dtype):
            raise InvalidRecordError(
                f"dtype_stored must be a Dtype, got {self.dtype_stored!r}"
            )
        self.matrix = check_matrix(self.matrix, f"record {self.name!r}")


Source = Union[bytes, bytearray, str, Path, BinaryIO]


def write_actd(records: list[LayerRecord], sink: Union[str, Path, BinaryIO]) -> int:
    """Serialize records to ``sink`` (path or binary stream).

    Returns:
        Number of bytes written.

    Raises:
        DuplicateRecordError: If two records share (name, kind).
        InvalidRecordError: On unencodable names, 2^16+ byte names,
            dimensions beyond u32, or values that do not survive the
            stored-precision narrowing (e.g. overflow to infinity in F32).
    """
    seen: set[tuple[str, RecordKind]] = set()
    for record in records:
        key = (record.name, record.kind)
        if key in seen:
            raise DuplicateRecordError(
                f"duplicate record {record.name!r} with kind {record.kind.name}"
            )
        seen.add(key)

    chunks = [_HEADER.pack(MAGIC, VERSION, 0, len(records))]
    for record in records:
        name_bytes = record.name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise InvalidRecordError(f"record name too long ({len(name_bytes)} bytes)")
        rows, cols = record.matrix.shape
        if rows > 0xFFFFFFFF or cols > 0xFFFFFFFF:
            raise InvalidRecordError(f"record {record.name!r} dimensions exceed u32")
        with np.errstate(over="ignore"):  # overflow is detected right below
            payload = np.ascontiguousarray(
                record.matrix, dtype=record.dtype_stored.np_dtype
            )
        if not np.isfinite(payload).all():
            raise InvalidRecordError(
                f"record {record.name!r} does not fit in "
                f"{record.dtype_stored.name} (narrowing produced non-finite values)"
            )
        chunks.append(_NAME_LEN.pack(len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(
            _REC_META.pack(record.dtype_stored.value, record.kind.value, rows, cols)
        )
        chunks.append(payload.tobytes())

    blob = b"".join(chunks)
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(blob)
    else:
        sink.write(blob)
    return len(blob)


_READ_CHUNK = 1 << 20


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    # Read in bounded chunks: a corrupted record can declare dimensions whose
    # payload size exceeds what a single read() accepts, and bailing at the
    # first short read keeps such records from forcing huge allocations.
    parts: list[bytes] = []
    got = 0
    while got < count:
        piece = stream.read(min(_READ_CHUNK, count - got))
        if not piece:
            raise TruncatedFileError(
                f"stream ended while reading {what} ({got}/{count} bytes)"
            )
        parts.append(piece)
        got += len(piece)
    return b"".join(parts)


def read_actd(source: Source) -> list[LayerRecord]:
    """Parse an ACTD container from bytes, a path, or a binary stream.

    Stored F32 payloads are widened to float64 internally; ``dtype_stored``
    remembers the on-disk precision so round-trips stay byte-identical.

    Raises:
        BadMagicError, UnsupportedVersionError, TruncatedFileError,
        NonFinitePayloadError, DuplicateRecordError, InvalidRecordError —
        one distinct diagnostic per failure mode; never anything else,
        however malformed the input.
    """
    if isinstance(source, (bytes, bytearray)):
        stream: BinaryIO = io.BytesIO(bytes(source))
    elif isinstance(source, (str, Path)):
        stream = io.BytesIO(Path(source).read_bytes())
    else:
        stream = source

    head = stream.read(_HEADER.size)
    if head is None or len(head) < 4 or head[:4] != MAGIC:
        raise BadMagicError("source does not start with the ACTD magic")
    if len(head) < _HEADER.size:
        raise TruncatedFileError("stream ended inside the header")
    _, version, flags, count = _HEADER.unpack(head)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported ACTD version {version}")
    if flags != 0:
        raise InvalidRecordError(f"unsupported flags value {flags:#06x}")

    records: list[LayerRecord] = []
    seen: set[tuple[str, RecordKind]] = set()
    for index in range(count):
        label = f"record {index}"
        (name_len,) = _NAME_LEN.unpack(_read_exact(stream, _NAME_LEN.size, f"{label} name length"))
        name_bytes = _read_exact(stream, name_len, f"{label} name")
        try:
            name = name_bytes.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidRecordError(f"{label} name is not valid UTF-8") from exc
        if not name:
            raise InvalidRecordError(f"{label} has an empty name")
        label = f"record {name!r}"
        dtype_code, kind_code, rows, cols = _REC_META.unpack(
            _read_exact(stream, _REC_META.size, f"{label} metadata")
        )
        try:
            dtype = Dtype(dtype_code)
        except ValueError as exc:
            raise InvalidRecordError(f"{label} has unknown dtype code {dtype_code}") from exc
        try:
            kind = RecordKind(kind_code)
        except ValueError as exc:
            raise InvalidRecordError(f"{label} has unknown kind code {kind_code}") from exc
        if rows == 0 or cols == 0:
            raise InvalidRecordError(f"{label} has zero-sized shape ({rows}, {cols})")
        payload_len = rows * cols * dtype.np_dtype.itemsize
        payload = _read_exact(stream, payload_len, f"{label} payload")
        matrix = np.frombuffer(payload, dtype=dtype.np_dtype).reshape(rows, cols)
        with np.errstate(invalid="ignore"):  # garbage payloads are caught below
            matrix = matrix.astype(np.float64)
        if not np.isfinite(matrix).all():
            raise NonFinitePayloadError(f"{label} payload contains non-finite values")
        key = (name, kind)
        if key in seen:
            raise DuplicateRecordError(f"duplicate record {name!r} with kind {kind.name}")
        seen.add(key)
        records.append(LayerRecord(name=name, kind=kind, matrix=matrix, dtype_stored=dtype))

    trailing = stream.read(1)
    if trailing:
        raise InvalidRecordError("trailing bytes after the last declared record")
    return records
