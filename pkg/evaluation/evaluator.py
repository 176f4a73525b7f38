"""
Challenge metrics: Recall@K, per-class AP in relationship and phrase mode,
and the weighted final score

    final = 0.2 * R@K + 0.4 * mAP_rel + 0.4 * mAP_phr

Attribute classes join both mAP averages; an attribute prediction matches on
its object box alone, so its AP is the same in both modes.
"""
from __future__ import annotations

from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from config import settings
from core.geometry import iou, union_box
from ranking.ranker import AttributePrediction, Prediction, TripletPrediction, rank_key
from services.dataset_io import GtAttribute, GtRelationship, VocabularySet

RECALL_WEIGHT = 0.2
MAP_REL_WEIGHT = 0.4
MAP_PHR_WEIGHT = 0.4


class MatchMode(str, Enum):
    RELATIONSHIP = "relationship"
    PHRASE = "phrase"


class MatchCriterion(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: MatchMode = MatchMode.RELATIONSHIP
    iou_threshold: float = Field(default_factory=lambda: settings.iou_threshold, gt=0.0, le=1.0)


class ClassAP(BaseModel):
    name: str
    kind: str
    n_gt: int
    ap_rel: float
    ap_phr: float


class EvalReport(BaseModel):
    recall_k: int
    recall_at_k: float
    map_rel: float
    map_phr: float
    final_score: float
    macro_recall: bool = False
    n_images: int = 0
    n_gt_relationships: int = 0
    n_gt_attributes: int = 0
    per_class: List[ClassAP] = Field(default_factory=list)


def weighted_score(recall: float, map_rel: float, map_phr: float) -> float:
    return RECALL_WEIGHT * recall + MAP_REL_WEIGHT * map_rel + MAP_PHR_WEIGHT * map_phr


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def _overlap(pred: TripletPrediction, gt: GtRelationship, mode: MatchMode) -> float:
    if mode is MatchMode.PHRASE:
        return iou(union_box(pred.subject_box, pred.object_box), union_box(gt.subject_box, gt.object_box))
    return min(iou(pred.subject_box, gt.subject_box), iou(pred.object_box, gt.object_box))


def match_predictions(
    preds: Sequence[TripletPrediction],
    gts: Sequence[GtRelationship],
    criterion: MatchCriterion,
) -> List[bool]:
    """Greedy matching in the given (score-descending) order.

    Each prediction takes the unmatched GT with equal labels and the largest
    overlap at or above the threshold; lower GT index wins ties.
    """
    used = [False] * len(gts)
    flags: List[bool] = []
    for pred in preds:
        best, best_overlap = -1, -1.0
        for index, gt in enumerate(gts):
            if used[index]:
                continue
            if (pred.subject_label, pred.predicate, pred.object_label) != (gt.subject_label, gt.predicate, gt.object_label):
                continue
            overlap = _overlap(pred, gt, criterion.mode)
            if overlap >= criterion.iou_threshold and overlap > best_overlap:
                best, best_overlap = index, overlap
        if best >= 0:
            used[best] = True
        flags.append(best >= 0)
    return flags


def match_attribute_predictions(
    preds: Sequence[AttributePrediction],
    gts: Sequence[GtAttribute],
    iou_threshold: float,
) -> List[bool]:
    used = [False] * len(gts)
    flags: List[bool] = []
    for pred in preds:
        best, best_overlap = -1, -1.0
        for index, gt in enumerate(gts):
            if used[index] or (pred.object_label, pred.attribute) != (gt.object_label, gt.attribute):
                continue
            overlap = iou(pred.object_box, gt.object_box)
            if overlap >= iou_threshold and overlap > best_overlap:
                best, best_overlap = index, overlap
        if best >= 0:
            used[best] = True
        flags.append(best >= 0)
    return flags


def _split(preds: Sequence[Prediction]) -> Tuple[List[TripletPrediction], List[AttributePrediction]]:
    rels = [p for p in preds if isinstance(p, TripletPrediction)]
    attrs = [p for p in preds if isinstance(p, AttributePrediction)]
    return rels, attrs


def _group(records: Sequence, key: str = "image_id") -> Dict[str, list]:
    grouped: Dict[str, list] = {}
    for record in records:
        grouped.setdefault(getattr(record, key), []).append(record)
    return grouped


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def recall_at_k(
    predictions: Mapping[str, Sequence[Prediction]],
    relationships: Sequence[GtRelationship],
    attributes: Sequence[GtAttribute] = (),
    k: Optional[int] = None,
    criterion: Optional[MatchCriterion] = None,
    macro: bool = False,
) -> float:
    """Fraction of GT (relationships and attributes) matched by each image's top k."""
    k = settings.recall_k if k is None else k
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    criterion = criterion or MatchCriterion()
    rel_by_image = _group(relationships)
    attr_by_image = _group(attributes)

    per_image: List[Tuple[int, int]] = []
    for image_id in sorted(set(rel_by_image) | set(attr_by_image)):
        ranked = sorted(predictions.get(image_id, ()), key=rank_key)[:k]
        rels, attrs = _split(ranked)
        gt_rels = rel_by_image.get(image_id, [])
        gt_attrs = attr_by_image.get(image_id, [])
        matched = sum(match_predictions(rels, gt_rels, criterion))
        matched += sum(match_attribute_predictions(attrs, gt_attrs, criterion.iou_threshold))
        per_image.append((matched, len(gt_rels) + len(gt_attrs)))

    if not per_image:
        return 1.0
    if macro:
        return float(np.mean([matched / total for matched, total in per_image]))
    return sum(m for m, _ in per_image) / sum(t for _, t in per_image)


def average_precision(flags: Sequence[bool], scores: Sequence[float], n_gt: int) -> float:
    """All-point interpolated AP: area under the precision envelope."""
    if n_gt <= 0:
        return 0.0
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    tp = np.asarray(flags, dtype=np.float64)[order]
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1.0 - tp)

    recall = tp_cum / n_gt
    precision = tp_cum / np.maximum(tp_cum + fp_cum, np.finfo(np.float64).eps)

    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def _class_flags(
    predictions: Mapping[str, Sequence[Prediction]],
    rel_by_image: Mapping[str, List[GtRelationship]],
    attr_by_image: Mapping[str, List[GtAttribute]],
    criterion: MatchCriterion,
) -> Dict[Tuple[str, int], Tuple[List[bool], List[float]]]:
    """Per (kind, class) match flags and scores over all images."""
    collected: Dict[Tuple[str, int], Tuple[List[bool], List[float]]] = {}
    for image_id in sorted(predictions):
        rels, attrs = _split(sorted(predictions[image_id], key=rank_key))
        for pred, flag in zip(rels, match_predictions(rels, rel_by_image.get(image_id, []), criterion)):
            flags, scores = collected.setdefault(("rel", pred.predicate), ([], []))
            flags.append(flag)
            scores.append(pred.score)
        attr_flags = match_attribute_predictions(attrs, attr_by_image.get(image_id, []), criterion.iou_threshold)
        for pred, flag in zip(attrs, attr_flags):
            flags, scores = collected.setdefault(("attr", pred.attribute), ([], []))
            flags.append(flag)
            scores.append(pred.score)
    return collected


def evaluate(
    predictions: Mapping[str, Sequence[Prediction]],
    relationships: Sequence[GtRelationship],
    attributes: Sequence[GtAttribute],
    vocab: VocabularySet,
    recall_k: Optional[int] = None,
    iou_threshold: Optional[float] = None,
    macro_recall: bool = False,
) -> EvalReport:
    recall_k = settings.recall_k if recall_k is None else recall_k
    threshold = settings.iou_threshold if iou_threshold is None else iou_threshold
    rel_criterion = MatchCriterion(mode=MatchMode.RELATIONSHIP, iou_threshold=threshold)
    phr_criterion = MatchCriterion(mode=MatchMode.PHRASE, iou_threshold=threshold)

    rel_by_image = _group(relationships)
    attr_by_image = _group(attributes)
    gt_counts: Dict[Tuple[str, int], int] = {}
    for rel in relationships:
        gt_counts[("rel", rel.predicate)] = gt_counts.get(("rel", rel.predicate), 0) + 1
    for attr in attributes:
        gt_counts[("attr", attr.attribute)] = gt_counts.get(("attr", attr.attribute), 0) + 1

    rel_flags = _class_flags(predictions, rel_by_image, attr_by_image, rel_criterion)
    phr_flags = _class_flags(predictions, rel_by_image, attr_by_image, phr_criterion)

    per_class: List[ClassAP] = []
    for kind, index in sorted(gt_counts):
        n_gt = gt_counts[(kind, index)]
        name = vocab.predicates.name(index) if kind == "rel" else vocab.attributes.name(index)
        per_class.append(
            ClassAP(
                name=name,
                kind=kind,
                n_gt=n_gt,
                ap_rel=average_precision(*rel_flags.get((kind, index), ([], [])), n_gt=n_gt),
                ap_phr=average_precision(*phr_flags.get((kind, index), ([], [])), n_gt=n_gt),
            )
        )

    map_rel = float(np.mean([c.ap_rel for c in per_class])) if per_class else 0.0
    map_phr = float(np.mean([c.ap_phr for c in per_class])) if per_class else 0.0
    recall = recall_at_k(predictions, relationships, attributes, recall_k, rel_criterion, macro_recall)

    report = EvalReport(
        recall_k=recall_k,
        recall_at_k=recall,
        map_rel=map_rel,
        map_phr=map_phr,
        final_score=weighted_score(recall, map_rel, map_phr),
        macro_recall=macro_recall,
        n_images=len(set(rel_by_image) | set(attr_by_image) | set(predictions)),
        n_gt_relationships=len(relationships),
        n_gt_attributes=len(attributes),
        per_class=per_class,
    )
    logger.info(
        f"R@{recall_k}={recall:.4f} mAP_rel={map_rel:.4f} mAP_phr={map_phr:.4f} final={report.final_score:.4f}"
    )
    return report


def format_report(report: EvalReport) -> str:
    """Per-class AP table and headline numbers, x100 with two decimals."""
    width = max([len(c.name) for c in report.per_class] + [5])
    lines = [f"{'class':<{width}}  kind  {'n_gt':>6}  {'AP_rel':>7}  {'AP_phr':>7}"]
    for c in report.per_class:
        lines.append(f"{c.name:<{width}}  {c.kind:<4}  {c.n_gt:>6}  {100 * c.ap_rel:>7.2f}  {100 * c.ap_phr:>7.2f}")
    averaging = "macro" if report.macro_recall else "micro"
    lines.extend(
        [
            "",
            f"R@{report.recall_k} ({averaging}): {100 * report.recall_at_k:.2f}",
            f"mAP_rel: {100 * report.map_rel:.2f}",
            f"mAP_phr: {100 * report.map_phr:.2f}",
            f"score:   {100 * report.final_score:.2f}",
        ]
    )
    return "\n".join(lines)
