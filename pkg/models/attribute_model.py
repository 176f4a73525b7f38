"""
Single-branch attribute classifier over object features (D -> hidden -> A+1).

Class 0 is the no_attribute background.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import settings
from features.pair_featurizer import MissingFeatureError
from services.checkpoint_store import KIND_ATTRIBUTE, CheckpointFormatError, CheckpointPayload
from services.dataset_io import ImageDetections
from services.feature_store import FeatureStore

from .base_model import BaseClassifier, Gradients
from .mlp import DimensionMismatchError, MlpParams
from .sampling import AttributeSample


@dataclass(frozen=True)
class AttributeBatch:
    features: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def subset(self, indices: np.ndarray) -> "AttributeBatch":
        return AttributeBatch(self.features[indices], self.targets[indices])


class AttributeModel(BaseClassifier):
    kind = KIND_ATTRIBUTE

    def __init__(self, head: MlpParams):
        super().__init__("AttributeModel", head.output_dim, head.input_dim)
        head.name = "head"
        self.head = head

    def branches(self) -> Dict[str, MlpParams]:
        return {"head": self.head}

    def logits(self, batch: AttributeBatch) -> Tuple[np.ndarray, Dict[str, Any]]:
        out, cache = self.head.forward(batch.features)
        return out, {"head": cache}

    def backward(self, cache: Dict[str, Any], grad_logits: np.ndarray) -> Gradients:
        grads, _ = self.head.backward(cache["head"], grad_logits)
        return {"head": grads}

    @classmethod
    def from_checkpoint(cls, payload: CheckpointPayload) -> "AttributeModel":
        if "head" not in payload.branches:
            raise CheckpointFormatError("attribute checkpoint lacks its head branch")
        model = cls(MlpParams.from_payload(payload.branches["head"], "head"))
        if (model.num_classes, model.feature_dim) != (payload.num_classes, payload.feature_dim):
            raise CheckpointFormatError(
                f"header declares A+1={payload.num_classes}, D={payload.feature_dim}; "
                f"layers give A+1={model.num_classes}, D={model.feature_dim}"
            )
        return model


def init_attribute_model(
    num_classes: int,
    feature_dim: int,
    hidden: Optional[int] = None,
    seed: int = 0,
) -> AttributeModel:
    hidden = settings.attribute_hidden if hidden is None else hidden
    rng = np.random.default_rng(seed)
    return AttributeModel(MlpParams.init((feature_dim, hidden, num_classes), rng, "head"))


def attribute_scores(model: AttributeModel, v_o: np.ndarray) -> np.ndarray:
    """Softmax over A+1 classes for one feature vector or a (N, D) stack."""
    v_o = np.asarray(v_o, dtype=np.float64)
    single = v_o.ndim == 1
    features = v_o[None, :] if single else v_o
    if features.shape[1] != model.feature_dim:
        raise DimensionMismatchError("head", f"expected feature dim {model.feature_dim}, got {features.shape[1]}")
    probs = model.predict_proba(AttributeBatch(features, np.zeros(len(features), dtype=np.int64)))
    return probs[0] if single else probs


def attribute_batch(
    images: Mapping[str, ImageDetections],
    features: FeatureStore,
    samples: Sequence[AttributeSample],
) -> AttributeBatch:
    refs = np.zeros(len(samples), dtype=np.int64)
    for row, sample in enumerate(samples):
        ref = images[sample.image_id].detections[sample.index].feature_ref
        if ref is None:
            raise MissingFeatureError(f"detection {sample.index} of image {sample.image_id!r} has no feature_ref")
        refs[row] = ref
    return AttributeBatch(features.take(refs), np.array([s.target for s in samples], dtype=np.int64))
