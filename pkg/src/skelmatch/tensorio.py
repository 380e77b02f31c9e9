"""Reader/writer for ``.stsk`` feature-tensor files.

Layout (all little-endian)::

    offset  size  field
    0       4     magic b"STSK"
    4       2     u16 version (= 1)
    6       1     u8 dtype (1 = f32, 2 = f64)
    7       1     u8 ndim (= 3)
    8       12    u32 dims C, N, T
    20      1     u8 spatial_scale
    21      1     u8 temporal_scale
    22      2     reserved, zero
    24      ...   payload, row-major (C, N, T), T fastest
"""

import io
import os
import struct

import numpy as np

from .errors import TensorFormatError
from .skeleton import FeatureMap

MAGIC = b"STSK"
VERSION = 1
HEADER = struct.Struct("<4sHBB3IBB2s")
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}
_U32_MAX = 2**32 - 1
# refuse to allocate more than this many payload elements from a header
MAX_ELEMENTS = 2**31


def dumps_tensor(fmap, dtype=None):
    data = fmap.data
    dt = np.dtype(dtype) if dtype is not None else data.dtype
    if dt not in _CODES:
        raise TensorFormatError(f"unsupported dtype {dt}", "version-unsupported")
    if any(d > _U32_MAX for d in data.shape):
        raise TensorFormatError(f"dimension exceeds u32: {data.shape}", "dim-overflow")
    header = HEADER.pack(
        MAGIC, VERSION, _CODES[dt], 3, *data.shape, fmap.spatial_scale, fmap.temporal_scale, b"\0\0"
    )
    return header + np.ascontiguousarray(data, dtype=dt.newbyteorder("<")).tobytes()


def loads_tensor(buf):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise TensorFormatError("not an STSK file (bad magic)", "bad-magic")
    if len(buf) < HEADER.size:
        raise TensorFormatError("header truncated", "payload-size-mismatch")
    magic, version, code, ndim, c, n, t, ss, ts, reserved = HEADER.unpack_from(buf)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}", "version-unsupported")
    if code not in _DTYPES:
        raise TensorFormatError(f"unsupported dtype code {code}", "version-unsupported")
    if ndim != 3:
        raise TensorFormatError(f"ndim must be 3, got {ndim}", "dim-overflow")
    count = c * n * t
    if count > MAX_ELEMENTS:
        raise TensorFormatError(f"dims {c}x{n}x{t} too large", "dim-overflow")
    dt = _DTYPES[code]
    payload = len(buf) - HEADER.size
    if payload != count * dt.itemsize:
        raise TensorFormatError(
            f"header declares {count} values ({count * dt.itemsize} bytes), payload has {payload} bytes",
            "payload-size-mismatch",
        )
    data = np.frombuffer(buf, dtype=dt, count=count, offset=HEADER.size).reshape(c, n, t)
    return FeatureMap(data.astype(dt.newbyteorder("=")), ss, ts)


def write_tensor(fmap, file, dtype=None):
    blob = dumps_tensor(fmap, dtype)
    if isinstance(file, (str, os.PathLike)):
        with open(file, "wb") as f:
            f.write(blob)
    else:
        file.write(blob)


def read_tensor(file):
    if isinstance(file, (str, os.PathLike)):
        with open(file, "rb") as f:
            return loads_tensor(f.read())
    if isinstance(file, (bytes, bytearray)):
        return loads_tensor(bytes(file))
    if isinstance(file, io.IOBase) or hasattr(file, "read"):
        return loads_tensor(file.read())
    raise TypeError(f"cannot read tensor from {type(file).__name__}")
