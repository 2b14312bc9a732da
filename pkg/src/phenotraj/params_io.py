"""Versioned flat-file persistence for named parameter arrays.

Layout: three ASCII header lines (magic, format version, one-line canonical
JSON metadata), then binary records. Records are preceded by a u32 count;
each is (u16 name length, name UTF-8, u8 rank, u32 extents, row-major
little-endian float64 values). Records are written in sorted-name order so
identical parameter sets serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .autodiff import Tensor
from .errors import DataError

MAGIC = b"PHENOTRAJ-PARAMS\n"
VERSION_LINE = b"version 1\n"

_ArrayOrTensor = Union[np.ndarray, Tensor]


def save_params(
    path: Union[str, Path],
    params: Mapping[str, _ArrayOrTensor],
    meta: Union[Mapping, None] = None,
) -> None:
    path = Path(path)
    blob = bytearray()
    blob += MAGIC
    blob += VERSION_LINE
    blob += json.dumps(
        dict(meta or {}), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    blob += b"\n"
    blob += struct.pack("<I", len(params))
    for name in sorted(params):
        value = params[name]
        # tobytes() always emits row-major bytes, whatever the memory layout
        arr = np.asarray(value.data if isinstance(value, Tensor) else value, dtype="<f8")
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.tobytes()
    path.write_bytes(bytes(blob))


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise DataError(f"{self.path}: truncated parameter file")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def line(self) -> bytes:
        end = self.blob.find(b"\n", self.pos)
        if end < 0:
            raise DataError(f"{self.path}: truncated parameter file")
        out = self.blob[self.pos : end + 1]
        self.pos = end + 1
        return out


def load_params(path: Union[str, Path]) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"parameter file not found: {path}")
    reader = _Reader(path.read_bytes(), path)
    if reader.line() != MAGIC:
        raise DataError(f"{path}: not a parameter file (bad magic)")
    if reader.line() != VERSION_LINE:
        raise DataError(f"{path}: unsupported format version")
    try:
        meta = json.loads(reader.line().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise DataError(f"{path}: unreadable metadata line")
    (count,) = struct.unpack("<I", reader.take(4))
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", reader.take(2))
        name = reader.take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", reader.take(1))
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank))
        n_values = int(np.prod(shape, dtype=np.int64)) if rank else 1
        data = reader.take(8 * n_values)
        params[name] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
    if reader.pos != len(reader.blob):
        raise DataError(f"{path}: trailing bytes after last record")
    return params, meta
