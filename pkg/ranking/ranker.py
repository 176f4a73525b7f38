"""
Relationship proposals, final scores and per-image top-k ranking.

    S_SPO = S_S * S_P * S_O        (relationship triplets)
    S_OA  = S_O * S_A              (attribute "is" triplets)

Ranking is by score descending; ties go to the lower (subject index, object
index, class index), with attributes keyed as (object, object, attribute).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from config import settings
from core.geometry import Box
from features.pair_featurizer import MissingFeatureError, PairFeaturizer
from models.attribute_model import AttributeModel, attribute_scores
from models.fusion_model import FusionModel
from services.dataset_io import ImageDetections


@dataclass(frozen=True)
class TripletPrediction:
    image_id: str
    subject_index: int
    subject_label: int
    subject_box: Box
    subject_score: float
    object_index: int
    object_label: int
    object_box: Box
    object_score: float
    predicate: int
    score: float

    def __post_init__(self) -> None:
        if self.predicate < 1:
            raise ValueError("no_relationship is never a ranked predicate")
        if self.subject_index == self.object_index:
            raise ValueError("subject and object must be distinct detections")


@dataclass(frozen=True)
class AttributePrediction:
    image_id: str
    object_index: int
    object_label: int
    object_box: Box
    object_score: float
    attribute: int
    score: float

    def __post_init__(self) -> None:
        if self.attribute < 1:
            raise ValueError("no_attribute is never a ranked attribute")


Prediction = Union[TripletPrediction, AttributePrediction]


def make_proposals(n_detections: int) -> List[Tuple[int, int]]:
    """All ordered pairs (i, j), i != j."""
    return list(permutations(range(n_detections), 2))


def score_triplet(s_s: float, s_p: float, s_o: float) -> float:
    return s_s * s_p * s_o


def score_attribute(s_o: float, s_a: float) -> float:
    return s_o * s_a


def rank_key(prediction: Prediction) -> Tuple[float, int, int, int, int]:
    if isinstance(prediction, TripletPrediction):
        return (-prediction.score, prediction.subject_index, prediction.object_index, prediction.predicate, 0)
    return (-prediction.score, prediction.object_index, prediction.object_index, prediction.attribute, 1)


def rank_top_k(predictions: Iterable[Prediction], k: Optional[int] = None) -> List[Prediction]:
    k = settings.top_k if k is None else k
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return sorted(predictions, key=rank_key)[:k]


def _top_classes(scores: np.ndarray, cap: Optional[int]) -> np.ndarray:
    """Indices >= 1 by descending score, lower index first on ties."""
    order = np.argsort(-scores[1:], kind="stable") + 1
    return order if cap is None else order[:cap]


def infer_image(
    image: ImageDetections,
    featurizer: PairFeaturizer,
    rel_model: Optional[FusionModel] = None,
    attr_model: Optional[AttributeModel] = None,
    per_pair_predicate_cap: Optional[int] = None,
    top_k: Optional[int] = None,
    baseline: bool = False,
) -> List[Prediction]:
    """Score every proposal and detection of one image and keep the top k.

    With `baseline=True` S_P is the featurizer's frequency-table probability
    and no relationship model is needed.
    """
    if per_pair_predicate_cap is not None and per_pair_predicate_cap < 1:
        raise ValueError(f"per_pair_predicate_cap must be at least 1, got {per_pair_predicate_cap}")
    detections = image.detections
    proposals = make_proposals(len(detections))
    candidates: List[Prediction] = []

    s_p_rows: Optional[np.ndarray] = None
    if proposals and baseline:
        s_p_rows = np.stack(
            [featurizer.freq.probabilities(detections[s].label, detections[o].label) for s, o in proposals]
        )
    elif proposals and rel_model is not None:
        s_p_rows = rel_model.predict_proba(featurizer.image_batch(image, proposals))

    if s_p_rows is not None:
        for (s, o), s_p in zip(proposals, s_p_rows):
            det_s, det_o = detections[s], detections[o]
            for predicate in _top_classes(s_p, per_pair_predicate_cap):
                candidates.append(
                    TripletPrediction(
                        image_id=image.image_id,
                        subject_index=s,
                        subject_label=det_s.label,
                        subject_box=det_s.box,
                        subject_score=det_s.score,
                        object_index=o,
                        object_label=det_o.label,
                        object_box=det_o.box,
                        object_score=det_o.score,
                        predicate=int(predicate),
                        score=score_triplet(det_s.score, float(s_p[predicate]), det_o.score),
                    )
                )

    if attr_model is not None and detections:
        refs = []
        for index, det in enumerate(detections):
            if det.feature_ref is None:
                raise MissingFeatureError(f"detection {index} of image {image.image_id!r} has no feature_ref")
            refs.append(det.feature_ref)
        attr_probs = attribute_scores(attr_model, featurizer.features.take(np.array(refs)))
        for index, (det, s_a) in enumerate(zip(detections, attr_probs)):
            for attribute in range(1, len(s_a)):
                candidates.append(
                    AttributePrediction(
                        image_id=image.image_id,
                        object_index=index,
                        object_label=det.label,
                        object_box=det.box,
                        object_score=det.score,
                        attribute=attribute,
                        score=score_attribute(det.score, float(s_a[attribute])),
                    )
                )

    ranked = rank_top_k(candidates, top_k)
    logger.debug(f"{image.image_id}: {len(candidates)} candidates, kept {len(ranked)}")
    return ranked
