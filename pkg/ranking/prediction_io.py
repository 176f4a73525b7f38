"""
Prediction files: the ground-truth record schema plus scores and detection
indices, one JSON object per line, images sorted by id.
"""
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Dict, Iterator, List, Literal, Mapping, Union

from loguru import logger
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from core.geometry import Box, InvalidBoxError
from services.dataset_io import AttributeRecord, DatasetFormatError, RelationshipRecord, VocabularySet

from .ranker import AttributePrediction, Prediction, TripletPrediction, rank_key

Score = Annotated[float, Field(ge=0.0, le=1.0)]


class RelationshipPredictionRecord(RelationshipRecord):
    kind: Literal["rel"] = "rel"
    subject_index: int = Field(ge=0)
    subject_score: Score
    object_index: int = Field(ge=0)
    object_score: Score
    score: Score


class AttributePredictionRecord(AttributeRecord):
    kind: Literal["attr"] = "attr"
    object_index: int = Field(ge=0)
    object_score: Score
    score: Score


PredictionRecord = Annotated[
    Union[RelationshipPredictionRecord, AttributePredictionRecord], Field(discriminator="kind")
]
_PREDICTION_ADAPTER: TypeAdapter = TypeAdapter(PredictionRecord)


def _to_record(prediction: Prediction, vocab: VocabularySet) -> BaseModel:
    if isinstance(prediction, TripletPrediction):
        return RelationshipPredictionRecord(
            image_id=prediction.image_id,
            subject_label=vocab.objects.name(prediction.subject_label),
            subject_box=list(prediction.subject_box.as_tuple()),
            object_label=vocab.objects.name(prediction.object_label),
            object_box=list(prediction.object_box.as_tuple()),
            predicate=vocab.predicates.name(prediction.predicate),
            subject_index=prediction.subject_index,
            subject_score=prediction.subject_score,
            object_index=prediction.object_index,
            object_score=prediction.object_score,
            score=prediction.score,
        )
    return AttributePredictionRecord(
        image_id=prediction.image_id,
        object_label=vocab.objects.name(prediction.object_label),
        object_box=list(prediction.object_box.as_tuple()),
        attribute=vocab.attributes.name(prediction.attribute),
        object_index=prediction.object_index,
        object_score=prediction.object_score,
        score=prediction.score,
    )


def _from_record(record: BaseModel, vocab: VocabularySet) -> Prediction:
    if isinstance(record, RelationshipPredictionRecord):
        return TripletPrediction(
            image_id=record.image_id,
            subject_index=record.subject_index,
            subject_label=vocab.objects.index(record.subject_label),
            subject_box=Box(*record.subject_box),
            subject_score=record.subject_score,
            object_index=record.object_index,
            object_label=vocab.objects.index(record.object_label),
            object_box=Box(*record.object_box),
            object_score=record.object_score,
            predicate=vocab.predicates.index(record.predicate),
            score=record.score,
        )
    assert isinstance(record, AttributePredictionRecord)
    return AttributePrediction(
        image_id=record.image_id,
        object_index=record.object_index,
        object_label=vocab.objects.index(record.object_label),
        object_box=Box(*record.object_box),
        object_score=record.object_score,
        attribute=vocab.attributes.index(record.attribute),
        score=record.score,
    )


def write_predictions(
    path: Union[str, Path],
    predictions: Mapping[str, List[Prediction]],
    vocab: VocabularySet,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for image_id in sorted(predictions):
            for prediction in sorted(predictions[image_id], key=rank_key):
                fh.write(_to_record(prediction, vocab).model_dump_json())
                fh.write("\n")
                count += 1
    logger.info(f"Wrote {count} predictions for {len(predictions)} images to {path}")


def _iter_predictions(path: Path, vocab: VocabularySet) -> Iterator[Prediction]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield _from_record(_PREDICTION_ADAPTER.validate_json(line), vocab)
            except ValidationError as exc:
                raise DatasetFormatError(f"malformed prediction record: {exc}", path, lineno) from None
            except (DatasetFormatError, InvalidBoxError, ValueError) as exc:
                raise DatasetFormatError(str(exc), path, lineno) from None


def read_predictions(path: Union[str, Path], vocab: VocabularySet) -> Dict[str, List[Prediction]]:
    """Predictions grouped by image id, each group in rank order."""
    path = Path(path)
    grouped: Dict[str, List[Prediction]] = {}
    for prediction in _iter_predictions(path, vocab):
        grouped.setdefault(prediction.image_id, []).append(prediction)
    for group in grouped.values():
        group.sort(key=rank_key)
    logger.debug(f"Read predictions for {len(grouped)} images from {path}")
    return grouped
