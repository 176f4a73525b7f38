from __future__ import annotations

import itertools
from typing import List, Optional

import numpy as np
import pytest

from core.geometry import Box, iou, union_box
from evaluation.evaluator import (
    MatchCriterion,
    MatchMode,
    average_precision,
    evaluate,
    format_report,
    match_attribute_predictions,
    match_predictions,
    recall_at_k,
    weighted_score,
)
from ranking.ranker import AttributePrediction, TripletPrediction
from services.dataset_io import GtAttribute, GtRelationship, VocabularySet

MAN, HORSE = 0, 1
RIDE, FEED = 1, 2
BROWN = 1

SUBJECT = Box(0, 0, 10, 10)
OBJECT = Box(10, 0, 20, 10)

RELATIONSHIP = MatchCriterion(mode=MatchMode.RELATIONSHIP, iou_threshold=0.5)
PHRASE = MatchCriterion(mode=MatchMode.PHRASE, iou_threshold=0.5)


@pytest.fixture
def vocab() -> VocabularySet:
    return VocabularySet.from_names(["man", "horse"], ["no_relationship", "ride", "feed"], ["no_attribute", "brown"])


def _gt(image_id: str = "img", subject_box: Box = SUBJECT, object_box: Box = OBJECT, predicate: int = RIDE) -> GtRelationship:
    return GtRelationship(image_id, MAN, subject_box, HORSE, object_box, predicate)


def _pred(
    score: float,
    image_id: str = "img",
    subject_box: Box = SUBJECT,
    object_box: Box = OBJECT,
    predicate: int = RIDE,
    subject_label: int = MAN,
    subject_index: int = 0,
    object_index: int = 1,
) -> TripletPrediction:
    return TripletPrediction(
        image_id, subject_index, subject_label, subject_box, 1.0, object_index, HORSE, object_box, 1.0, predicate, score
    )


@pytest.mark.parametrize(
    "recall, map_rel, map_phr, expected",
    [
        (72.98, 26.54, 32.77, 38.32),
        (74.13, 32.41, 39.55, 43.61),
        (74.46, 34.16, 39.59, 44.39),
        (74.40, 34.96, 40.70, 45.14),
        (0.0, 0.0, 0.0, 0.0),
    ],
)
def test_weighted_score_reproduces_published_rows(recall: float, map_rel: float, map_phr: float, expected: float) -> None:
    assert weighted_score(recall, map_rel, map_phr) == pytest.approx(expected, abs=0.005)


def test_identical_prediction_matches() -> None:
    assert match_predictions([_pred(0.9)], [_gt()], RELATIONSHIP) == [True]
    assert match_predictions([_pred(0.9)], [_gt()], PHRASE) == [True]


def test_relationship_and_phrase_modes_differ() -> None:
    narrow_subject = Box(0, 0, 10, 4)
    pred = _pred(0.9, subject_box=narrow_subject)
    assert iou(narrow_subject, SUBJECT) == pytest.approx(0.4)
    assert iou(union_box(narrow_subject, OBJECT), union_box(SUBJECT, OBJECT)) >= 0.5

    assert match_predictions([pred], [_gt()], RELATIONSHIP) == [False]
    assert match_predictions([pred], [_gt()], PHRASE) == [True]


def test_labels_must_agree_in_both_modes() -> None:
    for pred in (_pred(0.9, predicate=FEED), _pred(0.9, subject_label=HORSE)):
        assert match_predictions([pred], [_gt()], RELATIONSHIP) == [False]
        assert match_predictions([pred], [_gt()], PHRASE) == [False]


def test_each_gt_is_consumed_once() -> None:
    assert match_predictions([_pred(0.9), _pred(0.8)], [_gt()], RELATIONSHIP) == [True, False]


def test_best_overlap_wins() -> None:
    shifted = _gt(subject_box=Box(1, 0, 11, 10))
    flags = match_predictions([_pred(0.9), _pred(0.8, subject_box=Box(1, 0, 11, 10))], [shifted, _gt()], RELATIONSHIP)
    assert flags == [True, True]


def test_attribute_matching() -> None:
    gt = GtAttribute("img", HORSE, OBJECT, BROWN)
    hit = AttributePrediction("img", 1, HORSE, OBJECT, 1.0, BROWN, 0.9)
    wrong_label = AttributePrediction("img", 0, MAN, OBJECT, 1.0, BROWN, 0.8)
    assert match_attribute_predictions([hit, hit], [gt], 0.5) == [True, False]
    assert match_attribute_predictions([wrong_label], [gt], 0.5) == [False]


def _max_matching(preds: List[TripletPrediction], gts: List[GtRelationship], criterion: MatchCriterion) -> int:
    choices = []
    for pred in preds:
        options: List[Optional[int]] = [None]
        options += [g for g, gt in enumerate(gts) if match_predictions([pred], [gt], criterion) == [True]]
        choices.append(options)
    best = 0
    for assignment in itertools.product(*choices):
        used = [g for g in assignment if g is not None]
        if len(used) == len(set(used)):
            best = max(best, len(used))
    return best


@pytest.mark.parametrize("mode", [MatchMode.RELATIONSHIP, MatchMode.PHRASE])
def test_greedy_equals_exhaustive_assignment(mode: MatchMode) -> None:
    rng = np.random.default_rng(42)
    criterion = MatchCriterion(mode=mode, iou_threshold=0.5)
    for _ in range(300):
        n_gt = int(rng.integers(1, 4))
        gts = [
            _gt(subject_box=Box(100 * g, 0, 100 * g + 10, 10), object_box=Box(100 * g + 10, 0, 100 * g + 20, 10))
            for g in range(n_gt)
        ]
        preds = []
        for _ in range(int(rng.integers(1, 6))):
            if rng.random() < 0.7:
                target = gts[int(rng.integers(n_gt))]
                dx, dy = rng.uniform(-1, 1, size=2)
                preds.append(
                    _pred(
                        float(rng.random()),
                        subject_box=Box(target.subject_box.x_min + dx, dy, target.subject_box.x_max + dx, 10 + dy),
                        object_box=target.object_box,
                    )
                )
            else:
                preds.append(_pred(float(rng.random()), subject_box=Box(1000, 0, 1010, 10)))
        preds.sort(key=lambda p: -p.score)
        assert sum(match_predictions(preds, gts, criterion)) == _max_matching(preds, gts, criterion)


def test_recall_examples() -> None:
    gts = [_gt(), _gt(predicate=FEED)]
    assert recall_at_k({"img": [_pred(0.9), _pred(0.8, predicate=FEED)]}, gts, k=50) == 1.0
    assert recall_at_k({"img": [_pred(0.9)]}, gts, k=50) == 0.5

    ranked = {"img": [_pred(0.9, predicate=FEED), _pred(0.8, subject_box=Box(50, 50, 60, 60)), _pred(0.7)]}
    assert recall_at_k(ranked, [_gt()], k=2) == 0.0
    assert recall_at_k(ranked, [_gt()], k=3) == 1.0


def test_recall_without_gt_is_one() -> None:
    assert recall_at_k({"img": [_pred(0.9)]}, [], k=50) == 1.0


def test_recall_counts_attributes() -> None:
    attr_gt = GtAttribute("img", HORSE, OBJECT, BROWN)
    preds = {"img": [_pred(0.9), AttributePrediction("img", 1, HORSE, OBJECT, 1.0, BROWN, 0.5)]}
    assert recall_at_k(preds, [_gt()], [attr_gt], k=50) == 1.0
    assert recall_at_k(preds, [_gt()], [attr_gt], k=1) == 0.5


def test_micro_and_macro_recall() -> None:
    gts = [_gt("a")] + [_gt("b", subject_box=Box(30 * i, 50, 30 * i + 10, 60)) for i in range(3)]
    preds = {"a": [_pred(0.9, image_id="a")]}
    assert recall_at_k(preds, gts, k=50) == pytest.approx(0.25)
    assert recall_at_k(preds, gts, k=50, macro=True) == pytest.approx(0.5)


def test_recall_is_monotone_in_k() -> None:
    rng = np.random.default_rng(5)
    gts = [_gt(subject_box=Box(20 * i, 0, 20 * i + 10, 10)) for i in range(5)]
    preds = []
    for _ in range(30):
        x = 20 * int(rng.integers(8))
        preds.append(_pred(float(rng.random()), subject_box=Box(x, 0, x + 10, 10)))
    recalls = [recall_at_k({"img": preds}, gts, k=k) for k in range(1, 32)]
    assert all(a <= b for a, b in zip(recalls, recalls[1:]))


def test_average_precision_examples() -> None:
    assert average_precision([True], [0.9], 1) == 1.0
    assert average_precision([True, False], [0.9, 0.8], 1) == pytest.approx(1.0)
    assert average_precision([False, True], [0.9, 0.8], 1) == pytest.approx(0.5)
    assert average_precision([False, False], [0.9, 0.8], 2) == 0.0
    assert average_precision([], [], 3) == 0.0
    assert average_precision([True, True], [0.5, 0.9], 4) == pytest.approx(0.5)


def test_average_precision_bounds() -> None:
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 20))
        flags = rng.random(n) < 0.5
        ap = average_precision(flags.tolist(), rng.random(n).tolist(), int(flags.sum()) + int(rng.integers(0, 3)))
        assert 0.0 <= ap <= 1.0


def test_evaluate_perfect_predictions(vocab: VocabularySet) -> None:
    attr_gt = GtAttribute("img", HORSE, OBJECT, BROWN)
    preds = {"img": [_pred(0.9), AttributePrediction("img", 1, HORSE, OBJECT, 1.0, BROWN, 0.5)]}
    report = evaluate(preds, [_gt()], [attr_gt], vocab)

    assert report.recall_at_k == 1.0
    assert report.map_rel == pytest.approx(1.0)
    assert report.map_phr == pytest.approx(1.0)
    assert report.final_score == pytest.approx(1.0)
    assert [(c.kind, c.name) for c in report.per_class] == [("attr", "brown"), ("rel", "ride")]
    assert "score:   100.00" in format_report(report)


def test_evaluate_excludes_classes_without_gt(vocab: VocabularySet) -> None:
    preds = {"img": [_pred(0.9, predicate=FEED), _pred(0.5)]}
    report = evaluate(preds, [_gt()], [], vocab)
    assert [c.name for c in report.per_class] == ["ride"]
    assert report.map_rel == pytest.approx(1.0)
    assert report.final_score == pytest.approx(weighted_score(1.0, 1.0, 1.0))


def test_evaluate_missed_class_scores_zero(vocab: VocabularySet) -> None:
    report = evaluate({"img": [_pred(0.9)]}, [_gt(), _gt(predicate=FEED)], [], vocab)
    aps = {c.name: c.ap_rel for c in report.per_class}
    assert aps == {"ride": pytest.approx(1.0), "feed": 0.0}
    assert report.map_rel == pytest.approx(0.5)
    assert report.recall_at_k == pytest.approx(0.5)
