"""LIPK weight container.

Layout (little endian)::

    b"LIPK"  u16 version  u32 c_out  u32 c_in  u32 k  u32 k  f64[c_out*c_in*k*k]

Entries are row-major. Dense matrices are stored with ``k = 1``.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .linalg import as_tensor4

MAGIC = b"LIPK"
VERSION = 1
_HEADER = struct.Struct("<4sH4I")


def dumps(filt):
    filt = as_tensor4(filt)
    header = _HEADER.pack(MAGIC, VERSION, *filt.shape)
    return header + np.ascontiguousarray(filt, dtype="<f8").tobytes()


def loads(data):
    if len(data) < _HEADER.size:
        raise FormatError("LIPK: truncated header")
    magic, version, c_out, c_in, kh, kw = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"LIPK: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"LIPK: unsupported version {version}")
    if kh != kw:
        raise FormatError(f"LIPK: non-square spatial dims {kh}x{kw}")
    shape = (c_out, c_in, kh, kw)
    if 0 in shape:
        raise FormatError(f"LIPK: empty dimension in {shape}")
    count = c_out * c_in * kh * kw
    payload = data[_HEADER.size:]
    if len(payload) != 8 * count:
        raise FormatError(f"LIPK: expected {8 * count} payload bytes, found {len(payload)}")
    arr = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise FormatError("LIPK: non-finite entries")
    return arr


def write(path, filt):
    Path(path).write_bytes(dumps(filt))


def read(path):
    return loads(Path(path).read_bytes())


def read_matrix(path):
    """Read a dense matrix stored as a ``c_out x c_in x 1 x 1`` container."""
    filt = read(path)
    if filt.shape[2] != 1:
        raise FormatError(f"LIPK: {path} holds a {filt.shape[2]}x{filt.shape[2]} kernel, not a matrix")
    return filt[:, :, 0, 0]


def write_matrix(path, mat):
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise FormatError(f"LIPK: matrix must be 2-D, got shape {mat.shape}")
    write(path, mat[:, :, None, None])
