"""On-disk formats.

Raw array container (``.mfxa``), all fields little-endian:

    offset 0   4 bytes   magic b"MFXA"
    offset 4   uint8     format version (1)
    offset 5   uint8     dtype code: 1 = float32, 2 = float64
    offset 6   uint16    ndim
    offset 8   uint64 x ndim   shape
    then       C-order payload

Features are written as float32. Motions are written as float64 so that a
save/load cycle is bitwise exact; the packed motion layout is (F, 201):
root translation (3), root rotation matrix (9, row-major), 21 body joint
matrices (189).
"""

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .codec import FeatureSequence, FeatureStats, Motion
from .errors import ShapeError

MAGIC = b"MFXA"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}


def atomic_write_bytes(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def pack_array(arr, dtype="<f4"):
    dtype = np.dtype(dtype)
    arr = np.ascontiguousarray(arr, dtype=dtype)
    header = MAGIC + struct.pack("<BBH", VERSION, _CODES[dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.tobytes(order="C")


def unpack_array(buf):
    buf = bytes(buf)
    if buf[:4] != MAGIC:
        raise ShapeError("not an MFXA array file")
    version, code, ndim = struct.unpack_from("<BBH", buf, 4)
    if version != VERSION or code not in _DTYPES:
        raise ShapeError(f"unsupported MFXA version/dtype ({version}, {code})")
    shape = struct.unpack_from(f"<{ndim}Q", buf, 8)
    offset = 8 + 8 * ndim
    dtype = _DTYPES[code]
    count = int(np.prod(shape)) if ndim else 1
    expected = offset + count * dtype.itemsize
    if len(buf) != expected:
        raise ShapeError(f"MFXA payload size mismatch: {len(buf)} != {expected}")
    return np.frombuffer(buf, dtype=dtype, count=count, offset=offset).reshape(shape).copy()


def save_array(path, arr, dtype="<f4"):
    atomic_write_bytes(path, pack_array(arr, dtype))


def load_array(path):
    return unpack_array(Path(path).read_bytes())


def save_motion(path, m):
    save_array(path, m.to_array(), "<f8")


def load_motion(path, fps):
    return Motion.from_array(load_array(path).astype(np.float64), fps)


def save_features(path, f):
    save_array(path, f.data, "<f4")


def load_features(path, normalized=False, stats_id=None):
    return FeatureSequence(load_array(path), normalized, stats_id)


def save_stats(path, stats):
    atomic_write_text(path, dump_json(stats.to_dict()))


def load_stats(path):
    return FeatureStats.from_dict(json.loads(Path(path).read_text()))
