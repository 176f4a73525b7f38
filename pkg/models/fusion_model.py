"""
Relationship classifier: per-class logits from four trainable branches are
added to the frozen semantic logits, then normalized by one softmax.

    logits = sem + spatial(22-d) + visual([v_s, v_p, v_o]) + subject(v_s) + object(v_o)

`use_spatial` and `use_solo_heads` drop the spatial branch or the two solo
heads from the sum. Dropped branches keep their parameters but receive no
updates and no gradient.
"""
from __future__ import annotations

from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from config import settings
from features.pair_featurizer import PairBatch, PairFeaturizer, TrainPair
from features.spatial_encoder import SPATIAL_DIM
from services.checkpoint_store import KIND_FUSION, CheckpointFormatError, CheckpointPayload
from services.dataset_io import ImageDetections

from .base_model import BaseClassifier, Gradients
from .mlp import DimensionMismatchError, MlpParams, softmax

FLAG_SPATIAL = 1
FLAG_SOLO_HEADS = 2

BRANCH_NAMES = ("spatial", "visual", "subject", "object")


class FusionModel(BaseClassifier):
    kind = KIND_FUSION

    def __init__(
        self,
        spatial: MlpParams,
        visual: MlpParams,
        subject_head: MlpParams,
        object_head: MlpParams,
        use_spatial: bool = True,
        use_solo_heads: bool = True,
    ):
        num_classes = spatial.output_dim
        feature_dim = subject_head.input_dim
        super().__init__("FusionModel", num_classes, feature_dim)

        expected_inputs = {
            "spatial": (spatial, SPATIAL_DIM),
            "visual": (visual, 3 * feature_dim),
            "subject": (subject_head, feature_dim),
            "object": (object_head, feature_dim),
        }
        for name, (branch, input_dim) in expected_inputs.items():
            if branch.input_dim != input_dim:
                raise DimensionMismatchError(name, f"expects {branch.input_dim} inputs, model needs {input_dim}")
            if branch.output_dim != num_classes:
                raise DimensionMismatchError(name, f"outputs {branch.output_dim} logits, model has {num_classes} classes")
            branch.name = name

        self.spatial = spatial
        self.visual = visual
        self.subject_head = subject_head
        self.object_head = object_head
        self.use_spatial = use_spatial
        self.use_solo_heads = use_solo_heads

    def branches(self) -> Dict[str, MlpParams]:
        return {
            "spatial": self.spatial,
            "visual": self.visual,
            "subject": self.subject_head,
            "object": self.object_head,
        }

    def trainable_branches(self) -> Dict[str, MlpParams]:
        active = {"visual": self.visual}
        if self.use_spatial:
            active["spatial"] = self.spatial
        if self.use_solo_heads:
            active["subject"] = self.subject_head
            active["object"] = self.object_head
        return active

    @property
    def flags(self) -> int:
        return (FLAG_SPATIAL if self.use_spatial else 0) | (FLAG_SOLO_HEADS if self.use_solo_heads else 0)

    def _check_batch(self, batch: PairBatch) -> None:
        if batch.sem_logits.ndim != 2 or batch.sem_logits.shape[1] != self.num_classes:
            raise DimensionMismatchError("semantic", f"expected (N, {self.num_classes}) logits, got {batch.sem_logits.shape}")
        for name, array in (("v_s", batch.v_s), ("v_p", batch.v_p), ("v_o", batch.v_o)):
            if array.ndim != 2 or array.shape[1] != self.feature_dim:
                raise DimensionMismatchError("visual", f"{name} must be (N, {self.feature_dim}), got {array.shape}")

    def logits(self, batch: PairBatch) -> Tuple[np.ndarray, Dict[str, Any]]:
        self._check_batch(batch)
        cache: Dict[str, Any] = {}
        total = np.array(batch.sem_logits, dtype=np.float64, copy=True)

        out, cache["visual"] = self.visual.forward(np.concatenate([batch.v_s, batch.v_p, batch.v_o], axis=1))
        total += out
        if self.use_spatial:
            out, cache["spatial"] = self.spatial.forward(batch.spatial)
            total += out
        if self.use_solo_heads:
            out, cache["subject"] = self.subject_head.forward(batch.v_s)
            total += out
            out, cache["object"] = self.object_head.forward(batch.v_o)
            total += out
        return total, cache

    def backward(self, cache: Dict[str, Any], grad_logits: np.ndarray) -> Gradients:
        # Every branch feeds the sum directly, so each sees the same upstream gradient.
        grads: Gradients = {}
        for name, branch in self.trainable_branches().items():
            grads[name], _ = branch.backward(cache[name], grad_logits)
        return grads

    @classmethod
    def from_checkpoint(cls, payload: CheckpointPayload) -> "FusionModel":
        missing = [name for name in BRANCH_NAMES if name not in payload.branches]
        if missing:
            raise CheckpointFormatError(f"fusion checkpoint lacks branches {missing}")
        model = cls(
            spatial=MlpParams.from_payload(payload.branches["spatial"], "spatial"),
            visual=MlpParams.from_payload(payload.branches["visual"], "visual"),
            subject_head=MlpParams.from_payload(payload.branches["subject"], "subject"),
            object_head=MlpParams.from_payload(payload.branches["object"], "object"),
            use_spatial=bool(payload.flags & FLAG_SPATIAL),
            use_solo_heads=bool(payload.flags & FLAG_SOLO_HEADS),
        )
        if (model.num_classes, model.feature_dim) != (payload.num_classes, payload.feature_dim):
            raise CheckpointFormatError(
                f"header declares K={payload.num_classes}, D={payload.feature_dim}; "
                f"layers give K={model.num_classes}, D={model.feature_dim}"
            )
        return model


def init_model(
    num_classes: int,
    feature_dim: int,
    spatial_hidden: Optional[Sequence[int]] = None,
    visual_hidden: Optional[Sequence[int]] = None,
    seed: int = 0,
    use_spatial: bool = True,
    use_solo_heads: bool = True,
) -> FusionModel:
    spatial_hidden = tuple(settings.spatial_hidden if spatial_hidden is None else spatial_hidden)
    visual_hidden = tuple(settings.visual_hidden if visual_hidden is None else visual_hidden)
    rng = np.random.default_rng(seed)
    return FusionModel(
        spatial=MlpParams.init((SPATIAL_DIM, *spatial_hidden, num_classes), rng, "spatial"),
        visual=MlpParams.init((3 * feature_dim, *visual_hidden, num_classes), rng, "visual"),
        subject_head=MlpParams.init((feature_dim, num_classes), rng, "subject"),
        object_head=MlpParams.init((feature_dim, num_classes), rng, "object"),
        use_spatial=use_spatial,
        use_solo_heads=use_solo_heads,
    )


def forward(model: FusionModel, pair: TrainPair) -> Tuple[np.ndarray, np.ndarray]:
    """Fused logits and probabilities for a single pair."""
    logits, _ = model.logits(PairBatch.from_pairs([pair]))
    return logits[0], softmax(logits[0])


def loss_and_grads(model: FusionModel, pairs: Union[PairBatch, Sequence[TrainPair]]) -> Tuple[float, Gradients]:
    batch = pairs if isinstance(pairs, PairBatch) else PairBatch.from_pairs(list(pairs))
    return model.loss_and_grads(batch)


def predict_predicate(
    model: FusionModel,
    featurizer: PairFeaturizer,
    image: ImageDetections,
    subject_index: int,
    object_index: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """S_P per predicate (no_relationship zeroed) and the full softmax."""
    pair = featurizer.pair(image, subject_index, object_index)
    _, probs = forward(model, pair)
    s_p = probs.copy()
    s_p[0] = 0.0
    return s_p, probs
