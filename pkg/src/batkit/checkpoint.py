"""Bit-exact model persistence.

Container layout (all integers little-endian, normative):

====================  =======================================================
bytes                 meaning
====================  =======================================================
4                     magic ``b"BGPT"``
u32                   format version (currently 1)
u32 + n bytes         length-prefixed config JSON:
                      ``{"model": {...}, "stage_tag": "..."}``, sorted keys
u32                   tensor count
per tensor, sorted    u16 name length; name (UTF-8); u8 dtype code
by name               (0 = float32, 1 = float64); u8 ndim; ndim x u64 dims;
                      raw little-endian element bytes
u32                   CRC-32 (zlib) over every preceding byte
====================  =======================================================

save/load round-trips tensor data bitwise. Saves are atomic (write to a
temp file in the same directory, then rename); loads verify magic, version
and the CRC footer before constructing anything.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import (CheckpointCorruptionError, CheckpointFormatError,
                     CheckpointVersionError)
from .model import ModelConfig, Params

MAGIC = b"BGPT"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def save(params: Params, path) -> None:
    """Serialize params (config included) to the container format."""
    path = Path(path)
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<I", VERSION)

    config_json = json.dumps(
        {"model": params.config.to_dict(), "stage_tag": params.stage_tag},
        sort_keys=True).encode("utf-8")
    payload += struct.pack("<I", len(config_json))
    payload += config_json

    names = sorted(params.tensors)
    payload += struct.pack("<I", len(names))
    for name in names:
        arr = params.tensors[name]
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        code = _DTYPE_CODES.get(np.dtype(le.dtype.str))
        if code is None:
            raise CheckpointFormatError(f"unsupported dtype {arr.dtype} for {name!r}")
        encoded = name.encode("utf-8")
        payload += struct.pack("<H", len(encoded))
        payload += encoded
        payload += struct.pack("<BB", code, arr.ndim)
        payload += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        payload += np.ascontiguousarray(le).tobytes()

    payload += struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF)

    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(
                f"truncated checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}")
        out = self.data[self.pos: self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load(path) -> tuple[Params, ModelConfig]:
    """Parse and verify a checkpoint; returns (params, model config)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8:
        raise CheckpointFormatError(f"file too short ({len(blob)} bytes)")

    footer = struct.unpack("<I", blob[-4:])[0]
    actual = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if footer != actual:
        raise CheckpointCorruptionError(
            f"CRC mismatch: footer {footer:#010x}, computed {actual:#010x}")

    r = _Reader(blob[:-4])
    if r.take(4) != MAGIC:
        raise CheckpointFormatError("bad magic; not a BGPT checkpoint")
    version = r.u32()
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported format version {version}")

    config_raw = r.take(r.u32())
    try:
        header = json.loads(config_raw.decode("utf-8"))
        cfg = ModelConfig.from_dict(header["model"])
        stage = header["stage_tag"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"bad config block: {exc}") from exc

    count = r.u32()
    tensors: dict[str, np.ndarray] = {}
    previous = None
    for _ in range(count):
        name = r.take(r.u16()).decode("utf-8")
        if previous is not None and name <= previous:
            raise CheckpointFormatError(
                f"tensor names not strictly sorted: {previous!r} then {name!r}")
        previous = name
        code = r.u8()
        if code not in _CODE_DTYPES:
            raise CheckpointFormatError(f"unknown dtype code {code}")
        ndim = r.u8()
        dims = struct.unpack(f"<{ndim}Q", r.take(8 * ndim))
        dtype = _CODE_DTYPES[code]
        nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(r.take(nbytes), dtype=dtype).reshape(dims)
        tensors[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    if r.pos != len(r.data):
        raise CheckpointFormatError(f"{len(r.data) - r.pos} trailing bytes")

    params = Params(cfg, tensors, stage)
    return params, cfg
