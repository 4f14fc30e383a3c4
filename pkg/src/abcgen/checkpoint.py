"""Binary checkpoint files for model weights plus optimizer state.

Layout (all integers little-endian):

    magic   4 bytes  "ABCL"
    version u32      currently 1
    V       u32      vocab size
    H       u32      hidden size
    layers  u32      LSTM layer count
    t       u64      optimizer step counter
    tensors          model tensors in declaration order, then the
                     optimizer's first-moment tensors, then its
                     second-moment tensors

Each tensor is (rank u32, dims u32 each, values float64 little-endian,
row-major).  Writes go to a temp file in the same directory followed by
an atomic rename, so a reader never observes a half-written file.
"""

import os
import struct

import numpy as np

from .model import ModelConfig, ModelParams, empty_params

MAGIC = b"ABCL"
VERSION = 1


class CheckpointError(Exception):
    """Raised for unreadable, foreign, or truncated checkpoint files."""


def _write_tensor(out, arr: np.ndarray):
    out.write(struct.pack("<I", arr.ndim))
    out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    out.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint (wanted {n} more bytes)")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def tensor(self, shape) -> np.ndarray:
        rank = self.u32()
        if rank != len(shape):
            raise CheckpointError(f"{self.path}: tensor rank {rank}, expected {len(shape)}")
        dims = tuple(self.u32() for _ in range(rank))
        if dims != tuple(shape):
            raise CheckpointError(f"{self.path}: tensor shape {dims}, expected {tuple(shape)}")
        count = int(np.prod(dims)) if dims else 1
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims)


def save_checkpoint(params: ModelParams, opt_state, path: str):
    """Write params and Adam state atomically; see module docstring for layout."""
    cfg = params.config
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<IIII", VERSION, cfg.vocab_size, cfg.hidden_size, cfg.num_layers))
        out.write(struct.pack("<Q", opt_state.t))
        for _, arr in params.tensor_items():
            _write_tensor(out, arr)
        for container in (opt_state.m, opt_state.v):
            for _, arr in container.tensor_items():
                _write_tensor(out, arr)
    os.replace(tmp, path)


def load_checkpoint(path: str, dropout: float = 0.0):
    """Read a checkpoint back; returns (params, opt_state).

    The file stores only the integer config fields, so the dropout rate
    is supplied by the caller (irrelevant for eval; training passes its
    configured value when resuming).
    """
    from .training import AdamState  # local import: training imports this module

    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    rd = _Reader(data, path)
    if rd.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version = rd.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    vocab, hidden, layers = rd.u32(), rd.u32(), rd.u32()
    step = rd.u64()
    cfg = ModelConfig(vocab_size=vocab, hidden_size=hidden, num_layers=layers, dropout=dropout)
    params = empty_params(cfg)
    containers = [params, empty_params(cfg), empty_params(cfg)]
    for container in containers:
        for _, arr in container.tensor_items():
            arr[:] = rd.tensor(arr.shape)
    if rd.pos != len(data):
        raise CheckpointError(f"{path}: trailing data after tensors ({len(data) - rd.pos} bytes)")
    return params, AdamState(m=containers[1], v=containers[2], t=step)
