"""Binary checkpoint archive for named float32 tensors.

Layout, all little-endian:

    magic     8 bytes  b"FLOWCKP1"
    version   u32
    step      u64
    count     u64      number of tensors
    per tensor:
        name_len u32, name UTF-8, rank u32, extents u64 x rank, data f32
    config    u64 byte length, UTF-8 text block

Tensors are written in sorted-name order so identical states produce
byte-identical files; writes go through a temp file and atomic rename."""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"FLOWCKP1"
VERSION = 1


def save_checkpoint(
    path: str | os.PathLike,
    tensors: dict[str, np.ndarray],
    step: int,
    config_text: str = "",
) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<IQQ", VERSION, step, len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<I", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b""
        blob += arr.tobytes(order="C")
    config_bytes = config_text.encode("utf-8")
    blob += struct.pack("<Q", len(config_bytes))
    blob += config_bytes
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.data):
            raise CheckpointError(f"{self.path}: truncated while reading {what}", self.offset)
        out = self.data[self.offset : self.offset + count]
        self.offset += count
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], int, str]:
    """Returns (tensors, step, config_text); raises on any corruption, never
    returning partial state."""
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data, str(path))
    magic = r.take(8, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}", 0)
    version, step, count = r.unpack("<IQQ", "header")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}", 8)
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<I", "tensor name length")
        name = r.take(name_len, "tensor name").decode("utf-8")
        (rank,) = r.unpack("<I", f"rank of {name}")
        shape = r.unpack(f"<{rank}Q", f"extents of {name}") if rank else ()
        size = int(np.prod(shape)) if shape else 1
        raw = r.take(size * 4, f"data of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    (config_len,) = r.unpack("<Q", "config length")
    config_text = r.take(config_len, "config text").decode("utf-8")
    if r.offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - r.offset} trailing bytes", r.offset)
    return tensors, step, config_text


def state_checkpoint_tensors(
    params: dict[str, np.ndarray],
    ema: dict[str, np.ndarray] | None,
    first_moment: dict[str, np.ndarray],
    second_moment: dict[str, np.ndarray],
) -> dict[str, np.ndarray]:
    """Flatten a training state into the checkpoint namespace."""
    out = {}
    for name, arr in params.items():
        out[f"model.{name}"] = arr
    if ema is not None:
        for name, arr in ema.items():
            out[f"ema.{name}"] = arr
    for name, arr in first_moment.items():
        out[f"opt.m.{name}"] = arr
    for name, arr in second_moment.items():
        out[f"opt.v.{name}"] = arr
    return out


def split_checkpoint_tensors(
    tensors: dict[str, np.ndarray],
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray] | None, dict, dict]:
    params, ema, m, v = {}, {}, {}, {}
    for name, arr in tensors.items():
        if name.startswith("model."):
            params[name[len("model.") :]] = arr
        elif name.startswith("ema."):
            ema[name[len("ema.") :]] = arr
        elif name.startswith("opt.m."):
            m[name[len("opt.m.") :]] = arr
        elif name.startswith("opt.v."):
            v[name[len("opt.v.") :]] = arr
        else:
            raise CheckpointError(f"unrecognized tensor namespace for {name!r}", 0)
    return params, (ema or None), m, v
