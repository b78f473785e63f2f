"""Binary serialization for model checkpoints and raw video tensors.

Checkpoint layout (all integers little-endian):

    magic               8 bytes  b"EGSTCKPT"
    format version      u32
    model config        u32 length + UTF-8 JSON (sorted keys)
    parameter count     u32
    parameter records   name (u16 length + UTF-8), ndim (u8),
                        ndim x u32 extents, raw float64 data (little-endian)
    optimizer flag      u8 (0 = absent)
    optimizer scalars   u32 length + UTF-8 JSON  (when present)
    momentum buffers    u32 count + parameter records (when present)
    batch-norm stats    u32 count + parameter records

Raw video tensor files reuse the same record encoding behind the magic
b"EGSTTENS"; a file holds exactly one named array. Frames can be read
incrementally, which makes the format usable over a named pipe.

Round-trips are bit-exact: data is written as raw float64 bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator, Optional

import numpy as np

from .errors import CheckpointError

CHECKPOINT_MAGIC = b"EGSTCKPT"
TENSOR_MAGIC = b"EGSTTENS"
FORMAT_VERSION = 1


def _read_exact(f: BinaryIO, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated file while reading {what}")
    return buf


def _write_array(f: BinaryIO, name: str, arr: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<B", arr.ndim))
    for ext in arr.shape:
        f.write(struct.pack("<I", ext))
    f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(f: BinaryIO) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", _read_exact(f, 2, "record name length"))
    name = _read_exact(f, name_len, "record name").decode("utf-8")
    (ndim,) = struct.unpack("<B", _read_exact(f, 1, f"rank of {name}"))
    shape = tuple(struct.unpack("<I", _read_exact(f, 4, f"shape of {name}"))[0]
                  for _ in range(ndim))
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    raw = _read_exact(f, count * 8, f"data of {name}")
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    return name, arr


def _write_json(f: BinaryIO, obj: dict) -> None:
    payload = json.dumps(obj, sort_keys=True).encode("utf-8")
    f.write(struct.pack("<I", len(payload)))
    f.write(payload)


def _read_json(f: BinaryIO, what: str) -> dict:
    (length,) = struct.unpack("<I", _read_exact(f, 4, f"{what} length"))
    return json.loads(_read_exact(f, length, what).decode("utf-8"))


@dataclass
class Checkpoint:
    """In-memory image of a checkpoint file."""

    config: dict
    params: dict[str, np.ndarray]
    bn_stats: dict[str, np.ndarray] = field(default_factory=dict)
    optimizer: Optional[dict] = None  # {"scalars": dict, "velocity": {name: array}}


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        _write_json(f, ckpt.config)
        f.write(struct.pack("<I", len(ckpt.params)))
        for name in sorted(ckpt.params):
            _write_array(f, name, ckpt.params[name])
        if ckpt.optimizer is None:
            f.write(struct.pack("<B", 0))
        else:
            f.write(struct.pack("<B", 1))
            _write_json(f, ckpt.optimizer["scalars"])
            velocity = ckpt.optimizer["velocity"]
            f.write(struct.pack("<I", len(velocity)))
            for name in sorted(velocity):
                _write_array(f, name, velocity[name])
        f.write(struct.pack("<I", len(ckpt.bn_stats)))
        for name in sorted(ckpt.bn_stats):
            _write_array(f, name, ckpt.bn_stats[name])


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "format version"))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported checkpoint version {version}, expected {FORMAT_VERSION}")
        config = _read_json(f, "model config")
        (n_params,) = struct.unpack("<I", _read_exact(f, 4, "parameter count"))
        params = dict(_read_array(f) for _ in range(n_params))
        (opt_flag,) = struct.unpack("<B", _read_exact(f, 1, "optimizer flag"))
        optimizer = None
        if opt_flag:
            scalars = _read_json(f, "optimizer scalars")
            (n_buf,) = struct.unpack("<I", _read_exact(f, 4, "momentum buffer count"))
            velocity = dict(_read_array(f) for _ in range(n_buf))
            optimizer = {"scalars": scalars, "velocity": velocity}
        (n_stats,) = struct.unpack("<I", _read_exact(f, 4, "batch-norm stat count"))
        bn_stats = dict(_read_array(f) for _ in range(n_stats))
    return Checkpoint(config=config, params=params, bn_stats=bn_stats, optimizer=optimizer)


# ---------------------------------------------------------------------------
# Raw video tensor files
# ---------------------------------------------------------------------------

def save_video_tensor(path: str | Path, name: str, frames: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        _write_array(f, name, frames)


def load_video_tensor(path: str | Path) -> tuple[str, np.ndarray]:
    with open(path, "rb") as f:
        magic = f.read(len(TENSOR_MAGIC))
        if magic != TENSOR_MAGIC:
            raise CheckpointError(f"{path}: not a raw tensor file")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "format version"))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported tensor file version {version}, expected {FORMAT_VERSION}")
        return _read_array(f)


def iter_video_frames(path: str | Path) -> Iterator[np.ndarray]:
    """Yield (C, H, W) frames of a stored C,T,H,W video one at a time.

    Reads incrementally, so the source may be a named pipe that is still
    being written.
    """
    with open(path, "rb") as f:
        magic = f.read(len(TENSOR_MAGIC))
        if len(magic) == 0:
            return  # empty stream: no frames
        if magic != TENSOR_MAGIC:
            raise CheckpointError(f"{path}: not a raw tensor file")
        (version,) = struct.unpack("<I", _read_exact(f, 4, "format version"))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: unsupported tensor file version {version}, expected {FORMAT_VERSION}")
        (name_len,) = struct.unpack("<H", _read_exact(f, 2, "record name length"))
        _read_exact(f, name_len, "record name")
        (ndim,) = struct.unpack("<B", _read_exact(f, 1, "rank"))
        if ndim != 4:
            raise CheckpointError(f"{path}: expected a C,T,H,W video, got rank {ndim}")
        c, t, h, w = (struct.unpack("<I", _read_exact(f, 4, "shape"))[0] for _ in range(4))
        # Stored layout is (C, T, H, W); a frame gathers one T-slice per channel.
        plane = h * w
        channels = np.empty((c, t, h, w), dtype=np.float64)
        for ci in range(c):
            for ti in range(t):
                raw = _read_exact(f, plane * 8, f"frame {ti} channel {ci}")
                channels[ci, ti] = np.frombuffer(raw, dtype="<f8").reshape(h, w)
                if ci == c - 1:
                    yield channels[:, ti].copy()
