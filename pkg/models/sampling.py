"""
Positive/negative example sampling for both classifiers.

Positives come from detections matching ground truth at IoU >= iou_match with
equal labels. Negatives are drawn uniformly (seeded) per image; their count is

    min(candidates, floor(ratio * max(positives, 1)))
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Dict, Iterable, List, Mapping, Sequence, TypeVar

import numpy as np
from loguru import logger

from core.geometry import iou
from features.pair_featurizer import PairSample
from services.dataset_io import GtAttribute, GtRelationship, ImageDetections

T = TypeVar("T")


@dataclass(frozen=True)
class AttributeSample:
    image_id: str
    index: int
    target: int = 0


def negative_budget(candidates: int, positives: int, ratio: float) -> int:
    if ratio < 0:
        raise ValueError(f"neg_pos_ratio must be non-negative, got {ratio}")
    return min(candidates, math.floor(ratio * max(positives, 1)))


def _subsample(rng: np.random.Generator, items: Sequence[T], keep: int) -> List[T]:
    if keep >= len(items):
        return list(items)
    chosen = np.sort(rng.choice(len(items), size=keep, replace=False))
    return [items[int(i)] for i in chosen]


def _group(records: Iterable[T], key: str) -> Dict[str, List[T]]:
    grouped: Dict[str, List[T]] = {}
    for record in records:
        grouped.setdefault(getattr(record, key), []).append(record)
    return grouped


def sample_pairs(
    images: Mapping[str, ImageDetections],
    relationships: Iterable[GtRelationship],
    neg_pos_ratio: float,
    iou_match: float = 0.5,
    seed: int = 0,
) -> List[PairSample]:
    """Relationship training examples over all ordered detection pairs."""
    rng = np.random.default_rng(seed)
    gt_by_image = _group(relationships, "image_id")
    samples: List[PairSample] = []
    n_pos = n_neg = 0

    for image_id in sorted(images):
        image = images[image_id]
        gts = gt_by_image.get(image_id, [])
        positives: List[PairSample] = []
        negatives: List[PairSample] = []
        for s, o in permutations(range(len(image)), 2):
            det_s, det_o = image.detections[s], image.detections[o]
            predicates = sorted(
                {
                    gt.predicate
                    for gt in gts
                    if gt.subject_label == det_s.label
                    and gt.object_label == det_o.label
                    and iou(det_s.box, gt.subject_box) >= iou_match
                    and iou(det_o.box, gt.object_box) >= iou_match
                }
            )
            if predicates:
                positives.extend(PairSample(image_id, s, o, p) for p in predicates)
            else:
                negatives.append(PairSample(image_id, s, o, 0))

        kept = _subsample(rng, negatives, negative_budget(len(negatives), len(positives), neg_pos_ratio))
        samples.extend(positives)
        samples.extend(kept)
        n_pos += len(positives)
        n_neg += len(kept)

    logger.info(f"Sampled {n_pos} positive and {n_neg} negative pairs from {len(images)} images")
    return samples


def sample_attributes(
    images: Mapping[str, ImageDetections],
    attributes: Iterable[GtAttribute],
    neg_pos_ratio: float,
    iou_match: float = 0.5,
    seed: int = 0,
) -> List[AttributeSample]:
    """Attribute training examples over single detections."""
    rng = np.random.default_rng(seed)
    gt_by_image = _group(attributes, "image_id")
    samples: List[AttributeSample] = []
    n_pos = n_neg = 0

    for image_id in sorted(images):
        image = images[image_id]
        gts = gt_by_image.get(image_id, [])
        positives: List[AttributeSample] = []
        negatives: List[AttributeSample] = []
        for index, det in enumerate(image.detections):
            matched = sorted(
                {
                    gt.attribute
                    for gt in gts
                    if gt.object_label == det.label and iou(det.box, gt.object_box) >= iou_match
                }
            )
            if matched:
                positives.extend(AttributeSample(image_id, index, a) for a in matched)
            else:
                negatives.append(AttributeSample(image_id, index, 0))

        kept = _subsample(rng, negatives, negative_budget(len(negatives), len(positives), neg_pos_ratio))
        samples.extend(positives)
        samples.extend(kept)
        n_pos += len(positives)
        n_neg += len(kept)

    logger.info(f"Sampled {n_pos} positive and {n_neg} negative objects from {len(images)} images")
    return samples
