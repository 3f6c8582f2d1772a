"""Named-tensor binary container for checkpoint parameter/optimizer blobs.

Same framing discipline as the feature format, with names attached:

    magic    4 bytes  "WHLT"
    version  u32      1
    count    u32      number of tensors
    per tensor:
        name_len  u32, then name_len bytes UTF-8
        dtype     u32   0 = float32 LE, 1 = float64 LE
        ndim      u32, then ndim u32 dims
        payload   raw little-endian values, C order

Entries round-trip in insertion order with dtype and shape preserved.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    BadMagicError,
    DtypeCodeError,
    PayloadSizeError,
    UnsupportedVersionError,
)

MAGIC = b"WHLT"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_tensors(tensors, path):
    """Write an ordered name -> ndarray mapping."""
    chunks = [struct.pack("<4sII", MAGIC, VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = _DTYPE_CODES.get(arr.dtype.newbyteorder("<"))
        if code is None:
            raise DtypeCodeError(f"tensor '{name}': dtype {arr.dtype} not storable")
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack(f"<II{arr.ndim}I", code, arr.ndim, *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def read_tensors(path):
    """Read back a dict of name -> ndarray (native byte order)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 12:
        raise PayloadSizeError(f"{path}: truncated header")
    _, version, count = struct.unpack_from("<4sII", raw)
    if version != VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    off = 12
    out = {}
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", raw, off)
            off += 4
            name = raw[off:off + name_len].decode("utf-8")
            if len(raw) < off + name_len:
                raise struct.error("name")
            off += name_len
            code, ndim = struct.unpack_from("<II", raw, off)
            off += 8
            shape = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
        except struct.error:
            raise PayloadSizeError(f"{path}: truncated tensor record") from None
        dtype = _CODE_DTYPES.get(code)
        if dtype is None:
            raise DtypeCodeError(f"{path}: tensor '{name}' has unknown dtype code {code}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if len(raw) < off + nbytes:
            raise PayloadSizeError(f"{path}: truncated payload for tensor '{name}'")
        arr = np.frombuffer(raw, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)), offset=off)
        out[name] = np.ascontiguousarray(arr.reshape(shape).astype(dtype.newbyteorder("=")))
        off += nbytes
    if off != len(raw):
        raise PayloadSizeError(f"{path}: {len(raw) - off} trailing bytes after last tensor")
    return out
