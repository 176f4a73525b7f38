"""
Model checkpoint files.

Layout (all little-endian):
    b"VRDM" | u32 version | u32 kind | u32 num_classes | u32 feature_dim | u32 flags
    u32 n_branches
    per branch: u32 name_len | name (utf-8) | u32 n_layers | n_layers * (u32 in, u32 out, u32 activation)
    then, branch by branch and layer by layer: weight (in*out float64, row-major), bias (out float64)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, List, Tuple, Union

import numpy as np
from loguru import logger

from core.errors import PipelineError

MAGIC = b"VRDM"
VERSION = 1

KIND_FUSION = 1
KIND_ATTRIBUTE = 2

ACTIVATION_CODES: Dict[str, int] = {"linear": 0, "relu": 1}
_ACTIVATION_NAMES = {code: name for name, code in ACTIVATION_CODES.items()}

_U32 = struct.Struct("<I")
_F64 = np.dtype("<f8")


class CheckpointFormatError(PipelineError):
    """Raised when a checkpoint file is malformed or of the wrong kind."""


@dataclass
class LayerPayload:
    weight: np.ndarray
    bias: np.ndarray
    activation: str


@dataclass
class CheckpointPayload:
    kind: int
    num_classes: int
    feature_dim: int
    flags: int = 0
    branches: Dict[str, List[LayerPayload]] = field(default_factory=dict)


def _write_u32(fh: BinaryIO, *values: int) -> None:
    for value in values:
        fh.write(_U32.pack(value))


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointFormatError(f"{self.path}: truncated checkpoint (needed {size} bytes at {self.offset})")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(_U32.size))[0]

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count * _F64.itemsize), dtype=_F64).astype(np.float64)


def save_checkpoint(path: Union[str, Path], payload: CheckpointPayload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write_u32(fh, VERSION, payload.kind, payload.num_classes, payload.feature_dim, payload.flags)
        _write_u32(fh, len(payload.branches))
        for name, layers in payload.branches.items():
            encoded = name.encode("utf-8")
            _write_u32(fh, len(encoded))
            fh.write(encoded)
            _write_u32(fh, len(layers))
            for layer in layers:
                fan_in, fan_out = layer.weight.shape
                _write_u32(fh, fan_in, fan_out, ACTIVATION_CODES[layer.activation])
        for layers in payload.branches.values():
            for layer in layers:
                fh.write(np.ascontiguousarray(layer.weight, dtype=_F64).tobytes())
                fh.write(np.ascontiguousarray(layer.bias, dtype=_F64).tobytes())
    logger.info(f"Checkpoint written to {path}")


def load_checkpoint(path: Union[str, Path], expected_kind: int) -> CheckpointPayload:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)

    if reader.take(4) != MAGIC:
        raise CheckpointFormatError(f"{path}: not a model checkpoint (bad magic)")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointFormatError(f"{path}: unsupported checkpoint version {version}")
    kind = reader.u32()
    if kind != expected_kind:
        raise CheckpointFormatError(f"{path}: checkpoint kind {kind} does not match expected kind {expected_kind}")
    num_classes, feature_dim, flags = reader.u32(), reader.u32(), reader.u32()

    shapes: List[Tuple[str, List[Tuple[int, int, str]]]] = []
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        layers = []
        for _ in range(reader.u32()):
            fan_in, fan_out, code = reader.u32(), reader.u32(), reader.u32()
            if code not in _ACTIVATION_NAMES:
                raise CheckpointFormatError(f"{path}: unknown activation code {code} in branch {name!r}")
            layers.append((fan_in, fan_out, _ACTIVATION_NAMES[code]))
        shapes.append((name, layers))

    branches: Dict[str, List[LayerPayload]] = {}
    for name, layers in shapes:
        branches[name] = [
            LayerPayload(
                weight=reader.f64(fan_in * fan_out).reshape(fan_in, fan_out),
                bias=reader.f64(fan_out),
                activation=activation,
            )
            for fan_in, fan_out, activation in layers
        ]

    if reader.offset != len(reader.data):
        raise CheckpointFormatError(f"{path}: {len(reader.data) - reader.offset} trailing bytes after parameters")
    return CheckpointPayload(kind, num_classes, feature_dim, flags, branches)
