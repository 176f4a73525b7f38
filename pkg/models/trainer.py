"""
Minibatch SGD with momentum for both classifiers.
"""
from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from config import settings
from core.errors import PipelineError
from features.pair_featurizer import PairFeaturizer
from services.dataset_io import Dataset

from .attribute_model import AttributeModel, attribute_batch
from .base_model import Batch, BaseClassifier
from .fusion_model import FusionModel
from .sampling import sample_attributes, sample_pairs


class TrainingDivergedError(PipelineError):
    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch}, batch {batch}: loss={loss}")


class TrainConfig(BaseModel):
    """Run-level training parameters; defaults come from settings."""

    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default_factory=lambda: settings.train_epochs, ge=1)
    neg_pos_ratio: float = Field(default_factory=lambda: settings.rel_neg_pos_ratio, ge=0.0)
    learning_rate: float = Field(default_factory=lambda: settings.learning_rate, ge=0.0)
    momentum: float = Field(default_factory=lambda: settings.momentum, ge=0.0, lt=1.0)
    batch_size: int = Field(default_factory=lambda: settings.batch_size, ge=1)
    iou_match: float = Field(default_factory=lambda: settings.iou_threshold, gt=0.0, le=1.0)
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0)


def fit(model: BaseClassifier, batch: Batch, config: TrainConfig) -> List[float]:
    """Train in place; returns the mean loss of each epoch."""
    n = len(batch)
    if n == 0:
        raise PipelineError(f"{model.name}: no training examples")

    rng = np.random.default_rng([config.seed, 1])
    branches = model.trainable_branches()
    velocity: Dict[str, List[Tuple[np.ndarray, np.ndarray]]] = {
        name: [(np.zeros_like(layer.weight), np.zeros_like(layer.bias)) for layer in branch.layers]
        for name, branch in branches.items()
    }

    trace: List[float] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for batch_number, start in enumerate(range(0, n, config.batch_size)):
            indices = order[start:start + config.batch_size]
            loss, grads = model.loss_and_grads(batch.subset(indices))
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, batch_number, loss)

            for name, layer_grads in grads.items():
                for layer, (grad_w, grad_b), (vel_w, vel_b) in zip(branches[name].layers, layer_grads, velocity[name]):
                    vel_w *= config.momentum
                    vel_w -= config.learning_rate * grad_w
                    vel_b *= config.momentum
                    vel_b -= config.learning_rate * grad_b
                    layer.weight += vel_w
                    layer.bias += vel_b
            total += loss * len(indices)

        trace.append(total / n)
        logger.info(f"{model.name} epoch {epoch}/{config.epochs}: loss={trace[-1]:.4f} ({n} examples)")
    return trace


def train(
    model: FusionModel,
    dataset: Dataset,
    featurizer: PairFeaturizer,
    config: TrainConfig,
) -> Tuple[FusionModel, List[float]]:
    """Sample relationship pairs from the dataset and fit the fusion model."""
    samples = sample_pairs(dataset.images, dataset.relationships, config.neg_pos_ratio, config.iou_match, config.seed)
    batch = featurizer.batch(dataset.images, samples)
    return model, fit(model, batch, config)


def train_attributes(
    model: AttributeModel,
    dataset: Dataset,
    config: TrainConfig,
) -> Tuple[AttributeModel, List[float]]:
    """Sample attribute examples (usually at ratio 1) and fit the attribute model."""
    samples = sample_attributes(dataset.images, dataset.attributes, config.neg_pos_ratio, config.iou_match, config.seed)
    batch = attribute_batch(dataset.images, dataset.features, samples)
    return model, fit(model, batch, config)
