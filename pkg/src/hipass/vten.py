"""VTEN1: a tiny binary container for named float tensors.

Layout: the 5-byte magic ``VTEN1`` followed by zero or more records, each
``{name_len: u32, name: utf-8 bytes, dtype: u8 (0=f32, 1=f64), rank: u32,
extents: rank * u32, data: little-endian values}``. All integers are
little-endian. Round trips are bitwise exact.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"VTEN1"

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def write_tensors(path, tensors) -> None:
    """Write named tensors (a dict or (name, array) iterable) to ``path``.

    Only float32/float64 arrays are accepted; order is preserved.
    """
    items = tensors.items() if hasattr(tensors, "items") else tensors
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in items:
            arr = np.asarray(arr)
            if arr.dtype not in _DTYPE_CODES:
                raise ValueError(
                    f"tensor {name!r} has dtype {arr.dtype}; only float32/float64 supported")
            code = _DTYPE_CODES[arr.dtype]
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BI", code, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=_CODE_DTYPES[code]).tobytes())


def _read_exact(fh, n: int, path, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"{path}: truncated container while reading {what}")
    return buf


def read_tensors(path) -> dict:
    """Read a VTEN1 container back into an ordered name -> array dict."""
    out = {}
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatError(
                f"{path}: bad magic {magic!r}, expected {MAGIC.decode()} "
                "(unsupported version or not a tensor container)")
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise FormatError(f"{path}: truncated container while reading name length")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(fh, name_len, path, "name").decode("utf-8")
            code, rank = struct.unpack("<BI", _read_exact(fh, 5, path, "record header"))
            if code not in _CODE_DTYPES:
                raise FormatError(f"{path}: unknown dtype code {code} for tensor {name!r}")
            shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, path, "extents"))
            dtype = _CODE_DTYPES[code]
            count = int(np.prod(shape, dtype=np.int64)) if rank else 1
            raw = _read_exact(fh, count * dtype.itemsize, path, f"data of {name!r}")
            arr = np.frombuffer(raw, dtype=dtype).reshape(shape)
            out[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    return out
