"""
Base classifier shared by the relationship and attribute models
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Protocol, Tuple, Union

import numpy as np
from loguru import logger

from services.checkpoint_store import CheckpointPayload, load_checkpoint, save_checkpoint

from .mlp import DimensionMismatchError, LayerGrad, MlpParams, softmax, softmax_cross_entropy

Gradients = Dict[str, List[LayerGrad]]


class Batch(Protocol):
    targets: np.ndarray

    def __len__(self) -> int: ...

    def subset(self, indices: np.ndarray) -> "Batch": ...


class BaseClassifier(ABC):
    """Softmax classifier built from named MLP branches whose logits are summed"""

    kind: int = 0

    def __init__(self, name: str, num_classes: int, feature_dim: int):
        self.name = name
        self.num_classes = num_classes
        self.feature_dim = feature_dim

    @abstractmethod
    def branches(self) -> Dict[str, MlpParams]:
        """All parameter branches, in checkpoint order"""
        pass

    @abstractmethod
    def logits(self, batch: Any) -> Tuple[np.ndarray, Dict[str, Any]]:
        """Fused logits (N, K) and the cache backward() needs"""
        pass

    @abstractmethod
    def backward(self, cache: Dict[str, Any], grad_logits: np.ndarray) -> Gradients:
        """Gradients for every trainable branch"""
        pass

    @classmethod
    @abstractmethod
    def from_checkpoint(cls, payload: CheckpointPayload) -> "BaseClassifier":
        pass

    @property
    def flags(self) -> int:
        return 0

    def trainable_branches(self) -> Dict[str, MlpParams]:
        return self.branches()

    def predict_proba(self, batch: Any) -> np.ndarray:
        return softmax(self.logits(batch)[0])

    def loss_and_grads(self, batch: Any) -> Tuple[float, Gradients]:
        """Mean cross-entropy over the batch and its analytic gradients"""
        if len(batch) == 0:
            raise ValueError(f"{self.name}: loss needs a non-empty batch")
        targets = np.asarray(batch.targets, dtype=np.int64)
        if targets.min() < 0 or targets.max() >= self.num_classes:
            raise DimensionMismatchError(self.name, f"targets must lie in [0, {self.num_classes})")
        logits, cache = self.logits(batch)
        loss, grad = softmax_cross_entropy(logits, targets)
        return loss, self.backward(cache, grad)

    def to_checkpoint(self) -> CheckpointPayload:
        return CheckpointPayload(
            kind=self.kind,
            num_classes=self.num_classes,
            feature_dim=self.feature_dim,
            flags=self.flags,
            branches={name: branch.to_payload() for name, branch in self.branches().items()},
        )

    def save(self, path: Union[str, Path]) -> None:
        save_checkpoint(path, self.to_checkpoint())
        logger.info(f"{self.name} saved ({self.num_classes} classes, feature dim {self.feature_dim})")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BaseClassifier":
        return cls.from_checkpoint(load_checkpoint(path, cls.kind))
