"""Binary weight serialization and the SHA-256 weight fingerprint.

Layout: magic "PFWT", version u32, parameter count u32, then per parameter
name length u16 + UTF-8 name, rank u8, dims as u32 each, and the values as
32-bit little-endian floats in row-major order. The fingerprint is the
SHA-256 digest of exactly these bytes.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MAGIC = b"PFWT"
VERSION = 1


class WeightFormatError(ValueError):
    """Weight blob is malformed, truncated, or has an unsupported version."""


def serialize_weights(params: dict[str, np.ndarray]) -> bytes:
    """Encode parameters (in dict order) as a PFWT blob."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(params))
    for name, value in params.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"parameter name too long: {name!r}")
        arr = np.asarray(value)
        if arr.ndim > 0xFF:
            raise ValueError(f"parameter rank too large: {arr.ndim}")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return bytes(out)


def deserialize_weights(blob: bytes) -> dict[str, np.ndarray]:
    """Decode a PFWT blob into float32 arrays; strict about every byte."""
    view = memoryview(blob)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise WeightFormatError("truncated weight blob")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise WeightFormatError("bad magic: not a PFWT weight blob")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise WeightFormatError(f"unsupported weight format version {version}")
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(take(4 * size), dtype="<f4").reshape(dims)
        if name in params:
            raise WeightFormatError(f"duplicate parameter name {name!r}")
        params[name] = data.copy()
    if offset != len(view):
        raise WeightFormatError(f"{len(view) - offset} trailing bytes after weight blob")
    return params


def weight_fingerprint(params: dict[str, np.ndarray]) -> bytes:
    """32-byte SHA-256 digest over the serialized weight bytes."""
    return hashlib.sha256(serialize_weights(params)).digest()
