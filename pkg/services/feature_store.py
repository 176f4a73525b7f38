"""
Binary feature store for pooled region features.

Layout (little-endian):
    b"VRDF" | uint32 count | uint32 dim | count*dim float32, row-major
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np
from loguru import logger

from core.errors import PipelineError

MAGIC = b"VRDF"
_HEADER = struct.Struct("<4sII")
_ROW_DTYPE = np.dtype("<f4")


class FeatureFormatError(PipelineError):
    """Raised when a feature file is malformed."""


class FeatureStore:
    """Immutable (count, dim) matrix of float32 feature rows."""

    def __init__(self, rows: np.ndarray):
        rows = np.asarray(rows, dtype=_ROW_DTYPE)
        if rows.ndim != 2:
            raise FeatureFormatError(f"Feature rows must be a 2-D array, got shape {rows.shape}")
        if rows.shape[1] == 0:
            raise FeatureFormatError("Feature dimension must be positive")
        if not np.all(np.isfinite(rows)):
            raise FeatureFormatError("Feature rows contain non-finite values")
        rows = rows.copy()
        rows.setflags(write=False)
        self._rows = rows

    @property
    def dim(self) -> int:
        return int(self._rows.shape[1])

    @property
    def count(self) -> int:
        return int(self._rows.shape[0])

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    def __len__(self) -> int:
        return self.count

    def has(self, ref: int) -> bool:
        return 0 <= ref < self.count

    def row(self, ref: int) -> np.ndarray:
        """Return a float64 copy of one row."""
        if not self.has(ref):
            raise FeatureFormatError(f"feature_ref {ref} out of range (store has {self.count} rows)")
        return self._rows[ref].astype(np.float64)

    def take(self, refs: np.ndarray) -> np.ndarray:
        """Gather rows as a float64 (len(refs), dim) matrix."""
        refs = np.asarray(refs, dtype=np.int64)
        if refs.size and (refs.min() < 0 or refs.max() >= self.count):
            raise FeatureFormatError(f"feature_ref out of range (store has {self.count} rows)")
        return self._rows[refs].astype(np.float64)


def read_features(path: Union[str, Path]) -> FeatureStore:
    path = Path(path)
    payload = path.read_bytes()
    if len(payload) < _HEADER.size:
        raise FeatureFormatError(f"{path}: file too short for header ({len(payload)} bytes)")

    magic, count, dim = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if dim == 0:
        raise FeatureFormatError(f"{path}: feature dimension must be positive")

    expected = count * dim * _ROW_DTYPE.itemsize
    body = payload[_HEADER.size:]
    if len(body) != expected:
        raise FeatureFormatError(f"{path}: expected {expected} bytes of features, found {len(body)}")

    rows = np.frombuffer(body, dtype=_ROW_DTYPE).reshape(count, dim)
    if not np.all(np.isfinite(rows)):
        raise FeatureFormatError(f"{path}: non-finite value in feature payload")

    logger.debug(f"Loaded {count}x{dim} features from {path}")
    return FeatureStore(rows)


def write_features(path: Union[str, Path], store: FeatureStore) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, store.count, store.dim))
        fh.write(np.ascontiguousarray(store.rows, dtype=_ROW_DTYPE).tobytes())
