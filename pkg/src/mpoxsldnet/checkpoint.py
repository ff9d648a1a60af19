"""MPXT binary checkpoint format.

Little-endian layout:

    magic   4 bytes  b"MPXT"
    version u32
    config  u32 byte length + UTF-8 JSON blob (run config and step counter)
    count   u32 number of tensors
    per tensor:
        name  u16 byte length + UTF-8 name
        rank  u8
        dims  u32 each
        dtype u8 (0 = 32-bit float)
        payload: raw row-major bytes

Tensors are float32 only; the float64 mirror mode exists for gradient checks,
not for persistence.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"MPXT"
FORMAT_VERSION = 1
DTYPE_F32 = 0
MAX_RANK = 8
MAX_DIM = 2**32 - 1


class CheckpointError(Exception):
    """Checkpoint I/O failure with a machine-readable code.

    Codes: bad_magic, bad_version, truncated, dim_overflow, bad_dtype.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass
class Checkpoint:
    version: int
    config: dict
    step: int
    tensors: dict[str, np.ndarray]


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError("truncated", f"file ended while reading {what}")
    return data


def save_checkpoint(path, config: dict, tensors: dict[str, np.ndarray],
                    step: int = 0) -> None:
    blob = json.dumps({"run_config": config, "step": step},
                      sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        if arr.dtype != np.float32:
            raise TypeError(f"checkpoint tensors must be float32, {name!r} is {arr.dtype}")
        if arr.ndim > MAX_RANK:
            raise CheckpointError("dim_overflow", f"{name!r} has rank {arr.ndim} > {MAX_RANK}")
        if any(d > MAX_DIM for d in arr.shape):
            raise CheckpointError("dim_overflow", f"{name!r} has a dim exceeding u32")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise CheckpointError("dim_overflow", f"tensor name longer than u16: {name!r}")
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", arr.ndim))
        for d in arr.shape:
            buf.write(struct.pack("<I", d))
        buf.write(struct.pack("<B", DTYPE_F32))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise CheckpointError("bad_magic", f"expected {MAGIC!r}, found {magic!r}")
        version, = struct.unpack("<I", _read_exact(f, 4, "version"))
        if version != FORMAT_VERSION:
            raise CheckpointError("bad_version", f"unsupported format version {version}")
        blob_len, = struct.unpack("<I", _read_exact(f, 4, "config length"))
        try:
            meta = json.loads(_read_exact(f, blob_len, "config blob").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError("truncated", f"config blob unreadable: {e}") from e
        count, = struct.unpack("<I", _read_exact(f, 4, "tensor count"))
        tensors: dict[str, np.ndarray] = {}
        for i in range(count):
            name_len, = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "tensor name").decode("utf-8")
            rank, = struct.unpack("<B", _read_exact(f, 1, "rank"))
            if rank > MAX_RANK:
                raise CheckpointError("dim_overflow", f"{name!r} has rank {rank}")
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            elements = 1
            for d in dims:
                elements *= d
            if elements > 2**40:
                raise CheckpointError("dim_overflow",
                                      f"{name!r} claims {elements} elements")
            dtype, = struct.unpack("<B", _read_exact(f, 1, "dtype"))
            if dtype != DTYPE_F32:
                raise CheckpointError("bad_dtype", f"{name!r} has dtype byte {dtype}")
            payload = _read_exact(f, 4 * elements, f"payload of {name!r}")
            tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return Checkpoint(version=version, config=meta.get("run_config", {}),
                      step=int(meta.get("step", 0)), tensors=tensors)


def checkpoint_byte_size(tensor_shapes: dict[str, tuple], config: dict,
                         step: int = 0) -> int:
    """Exact on-disk size from the format arithmetic (4 bytes per element
    plus headers), used by the summary command's storage estimate."""
    blob = json.dumps({"run_config": config, "step": step},
                      sort_keys=True).encode("utf-8")
    size = 4 + 4 + 4 + len(blob) + 4
    for name, shape in tensor_shapes.items():
        elements = 1
        for d in shape:
            elements *= d
        size += 2 + len(name.encode("utf-8")) + 1 + 4 * len(shape) + 1 + 4 * elements
    return size
