"""NPY v1.0 reading and writing with strict, distinct diagnostics.

Only C-order payloads of float32, float64 or uint16 are accepted; pickled
objects and Fortran layout are rejected outright. uint16 data is sensor
counts in [0, 2^11] and is normalized by 2048 on load.
"""

import ast
import struct

import numpy as np

MAGIC = b"\x93NUMPY"
UINT16_SCALE = 2048.0

_DTYPES = {"<f4": np.float32, "<f8": np.float64, "<u2": np.uint16, "|u2": np.uint16}


class NpyError(ValueError):
    """NPY parse/serialization failure; `kind` is a stable diagnostic tag."""

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def read_npy(path):
    """Load an NPY v1.0 array; uint16 payloads come back scaled to [0, ~16]."""
    with open(path, "rb") as fh:
        head = fh.read(8)
        if len(head) < 8 or head[:6] != MAGIC:
            raise NpyError("bad-magic", f"{path} is not an NPY file")
        major, minor = head[6], head[7]
        if (major, minor) != (1, 0):
            raise NpyError("unsupported-version", f"NPY version {major}.{minor}, only 1.0 supported")
        (hlen,) = struct.unpack("<H", fh.read(2))
        header = fh.read(hlen)
        if len(header) < hlen:
            raise NpyError("truncated-header", f"{path} ends inside the header")
        try:
            meta = ast.literal_eval(header.decode("latin1"))
            descr, fortran, shape = meta["descr"], meta["fortran_order"], tuple(meta["shape"])
        except Exception as exc:
            raise NpyError("bad-header", f"unparseable NPY header in {path}: {exc}") from exc
        if fortran:
            raise NpyError("fortran-order", f"{path} declares Fortran order; only C order is supported")
        if descr not in _DTYPES:
            raise NpyError("unsupported-dtype", f"{path} has dtype {descr!r}; supported: <f4, <f8, <u2")
        dtype = np.dtype(_DTYPES[descr])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = fh.read(count * dtype.itemsize)
        if len(payload) < count * dtype.itemsize:
            raise NpyError(
                "truncated-payload",
                f"{path}: expected {count * dtype.itemsize} payload bytes, got {len(payload)}",
            )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    if dtype == np.uint16:
        return arr.astype(np.float64) / UINT16_SCALE
    return arr.copy()


def read_image(path):
    """Read an NPY file that must hold a 2-D or 3-D image."""
    arr = read_npy(path)
    if arr.ndim not in (2, 3):
        raise NpyError("bad-shape", f"{path} holds a {arr.ndim}-D array; expected an (H, W) or (H, W, S) image")
    return np.ascontiguousarray(arr.astype(np.float64, copy=False))


def write_npy(path, arr):
    """Write a C-order NPY v1.0 file. float64 round-trips bit-exactly."""
    arr = np.ascontiguousarray(arr)
    if arr.dtype == np.uint16:
        descr = "<u2"
    elif arr.dtype == np.float32:
        descr = "<f4"
    elif arr.dtype == np.float64:
        descr = "<f8"
    else:
        raise NpyError("unsupported-dtype", f"cannot serialize dtype {arr.dtype}; use float32/float64/uint16")
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {tuple(arr.shape)!r}, }}"
    pad = (-(len(MAGIC) + 2 + 2 + len(header) + 1)) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([1, 0]))
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(arr.tobytes("C"))
