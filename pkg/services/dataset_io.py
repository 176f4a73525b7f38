"""
Dataset file formats: vocabularies, detections, ground truth and the
pair-feature sidecar.

Records are JSON lines validated with pydantic; any parse or validation
failure is reported as DatasetFormatError naming the file and line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Dict, Iterable, Iterator, List, Literal, Optional, Tuple, Union

from loguru import logger
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from config.world import NO_ATTRIBUTE, NO_RELATIONSHIP
from core.errors import PipelineError
from core.geometry import Box, Detection, ImageSize, InvalidBoxError

from .feature_store import FeatureStore, read_features

PathLike = Union[str, Path]

DETECTIONS_FILE = "detections.jsonl"
FEATURES_FILE = "features.bin"
PAIR_FEATURES_FILE = "pair_features.jsonl"
GT_FILE = "gt.jsonl"
OBJECT_VOCAB_FILE = "objects.txt"
PREDICATE_VOCAB_FILE = "predicates.txt"
ATTRIBUTE_VOCAB_FILE = "attributes.txt"

VocabKind = Literal["object", "predicate", "attribute"]


class DatasetFormatError(PipelineError):
    """Raised when a dataset file cannot be parsed or fails validation."""

    def __init__(self, message: str, path: Optional[PathLike] = None, line: Optional[int] = None):
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(f"{location}{message}")


# ---------------------------------------------------------------------------
# Vocabularies
# ---------------------------------------------------------------------------

_RESERVED_BACKGROUND = {"predicate": NO_RELATIONSHIP, "attribute": NO_ATTRIBUTE}


@dataclass(frozen=True)
class Vocabulary:
    """Ordered label names; a label's index is its position."""

    kind: str
    names: Tuple[str, ...]
    _lookup: Dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise DatasetFormatError(f"{self.kind} vocabulary has duplicate names")
        background = _RESERVED_BACKGROUND.get(self.kind)
        if background is not None and (not self.names or self.names[0] != background):
            raise DatasetFormatError(f"{self.kind} vocabulary must start with {background!r}")
        object.__setattr__(self, "_lookup", {name: i for i, name in enumerate(self.names)})

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: object) -> bool:
        return name in self._lookup

    def index(self, name: str) -> int:
        try:
            return self._lookup[name]
        except KeyError:
            raise DatasetFormatError(f"unknown {self.kind} label {name!r}") from None

    def name(self, index: int) -> str:
        if not 0 <= index < len(self.names):
            raise DatasetFormatError(f"{self.kind} index {index} out of range")
        return self.names[index]


@dataclass(frozen=True)
class VocabularySet:
    objects: Vocabulary
    predicates: Vocabulary
    attributes: Vocabulary

    @classmethod
    def from_names(
        cls,
        objects: Iterable[str],
        predicates: Iterable[str],
        attributes: Iterable[str],
    ) -> "VocabularySet":
        return cls(
            objects=Vocabulary("object", tuple(objects)),
            predicates=Vocabulary("predicate", tuple(predicates)),
            attributes=Vocabulary("attribute", tuple(attributes)),
        )


def read_vocabulary(path: PathLike, kind: VocabKind) -> Vocabulary:
    path = Path(path)
    names = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    while names and not names[-1]:
        names.pop()
    if any(not name for name in names):
        raise DatasetFormatError("blank line inside vocabulary", path)
    try:
        return Vocabulary(kind, tuple(names))
    except DatasetFormatError as exc:
        raise DatasetFormatError(str(exc), path) from None


def write_vocabulary(path: PathLike, vocab: Vocabulary) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{name}\n" for name in vocab.names), encoding="utf-8")


def read_vocabularies(
    objects: PathLike,
    predicates: PathLike,
    attributes: PathLike,
) -> VocabularySet:
    return VocabularySet(
        objects=read_vocabulary(objects, "object"),
        predicates=read_vocabulary(predicates, "predicate"),
        attributes=read_vocabulary(attributes, "attribute"),
    )


def write_vocabularies(directory: PathLike, vocab: VocabularySet) -> None:
    directory = Path(directory)
    write_vocabulary(directory / OBJECT_VOCAB_FILE, vocab.objects)
    write_vocabulary(directory / PREDICATE_VOCAB_FILE, vocab.predicates)
    write_vocabulary(directory / ATTRIBUTE_VOCAB_FILE, vocab.attributes)


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

BoxList = Annotated[List[float], Field(min_length=4, max_length=4)]


class DetectionRecord(BaseModel):
    image_id: str
    image_w: float = Field(gt=0)
    image_h: float = Field(gt=0)
    label: str
    score: float = Field(ge=0.0, le=1.0)
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    feature_ref: Optional[int] = Field(default=None, ge=0)


class RelationshipRecord(BaseModel):
    kind: Literal["rel"] = "rel"
    image_id: str
    subject_label: str
    subject_box: BoxList
    object_label: str
    object_box: BoxList
    predicate: str


class AttributeRecord(BaseModel):
    kind: Literal["attr"] = "attr"
    image_id: str
    object_label: str
    object_box: BoxList
    attribute: str


GtRecord = Annotated[Union[RelationshipRecord, AttributeRecord], Field(discriminator="kind")]
_GT_ADAPTER: TypeAdapter = TypeAdapter(GtRecord)


class PairFeatureRecord(BaseModel):
    image_id: str
    subject_index: int = Field(ge=0)
    object_index: int = Field(ge=0)
    feature_ref: int = Field(ge=0)


# ---------------------------------------------------------------------------
# Domain containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImageDetections:
    """All detections of one image, in file order (position = detection index)."""

    image_id: str
    size: ImageSize
    detections: Tuple[Detection, ...]

    def __len__(self) -> int:
        return len(self.detections)


@dataclass(frozen=True)
class GtRelationship:
    image_id: str
    subject_label: int
    subject_box: Box
    object_label: int
    object_box: Box
    predicate: int

    def __post_init__(self) -> None:
        if self.predicate < 1:
            raise DatasetFormatError("ground-truth predicate cannot be no_relationship")


@dataclass(frozen=True)
class GtAttribute:
    image_id: str
    object_label: int
    object_box: Box
    attribute: int

    def __post_init__(self) -> None:
        if self.attribute < 1:
            raise DatasetFormatError("ground-truth attribute cannot be no_attribute")


class PairFeatureIndex:
    """Maps an unordered detection pair of an image to its union-box feature row."""

    def __init__(self, entries: Optional[Dict[Tuple[str, int, int], int]] = None):
        self._entries: Dict[Tuple[str, int, int], int] = {}
        for (image_id, i, j), ref in (entries or {}).items():
            self.add(image_id, i, j, ref)

    @staticmethod
    def _key(image_id: str, i: int, j: int) -> Tuple[str, int, int]:
        return (image_id, i, j) if i <= j else (image_id, j, i)

    def add(self, image_id: str, i: int, j: int, ref: int) -> None:
        if i == j:
            raise DatasetFormatError(f"pair feature for {image_id} uses the same detection twice ({i})")
        self._entries[self._key(image_id, i, j)] = ref

    def lookup(self, image_id: str, i: int, j: int) -> Optional[int]:
        return self._entries.get(self._key(image_id, i, j))

    def items(self) -> Iterator[Tuple[Tuple[str, int, int], int]]:
        return iter(sorted(self._entries.items()))

    def __len__(self) -> int:
        return len(self._entries)


# ---------------------------------------------------------------------------
# Readers / writers
# ---------------------------------------------------------------------------


def _iter_lines(path: Path) -> Iterator[Tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield lineno, line


def _box_from(values: List[float], path: Path, lineno: int) -> Box:
    try:
        return Box(*values)
    except InvalidBoxError as exc:
        raise DatasetFormatError(str(exc), path, lineno) from None


def _write_lines(path: PathLike, records: Iterable[BaseModel]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.model_dump_json())
            fh.write("\n")


def read_detections(path: PathLike, objects: Vocabulary) -> Dict[str, ImageDetections]:
    """Read detections grouped by image id, in first-appearance order."""
    path = Path(path)
    grouped: Dict[str, List[Detection]] = {}
    sizes: Dict[str, ImageSize] = {}

    for lineno, line in _iter_lines(path):
        try:
            record = DetectionRecord.model_validate_json(line)
        except ValidationError as exc:
            raise DatasetFormatError(f"malformed detection record: {exc}", path, lineno) from None
        if record.label not in objects:
            raise DatasetFormatError(f"unknown object label {record.label!r}", path, lineno)

        size = ImageSize(record.image_w, record.image_h)
        known = sizes.setdefault(record.image_id, size)
        if known != size:
            raise DatasetFormatError(
                f"image {record.image_id!r} declared as {known.w}x{known.h} and {size.w}x{size.h}", path, lineno
            )

        box = _box_from([record.x_min, record.y_min, record.x_max, record.y_max], path, lineno)
        grouped.setdefault(record.image_id, []).append(
            Detection(
                image_id=record.image_id,
                label=objects.index(record.label),
                score=record.score,
                box=box,
                feature_ref=record.feature_ref,
            )
        )

    images = {
        image_id: ImageDetections(image_id, sizes[image_id], tuple(dets))
        for image_id, dets in grouped.items()
    }
    logger.debug(f"Read {sum(len(v) for v in images.values())} detections in {len(images)} images from {path}")
    return images


def write_detections(path: PathLike, images: Iterable[ImageDetections], objects: Vocabulary) -> None:
    def records() -> Iterator[DetectionRecord]:
        for image in images:
            for det in image.detections:
                yield DetectionRecord(
                    image_id=image.image_id,
                    image_w=image.size.w,
                    image_h=image.size.h,
                    label=objects.name(det.label),
                    score=det.score,
                    x_min=det.box.x_min,
                    y_min=det.box.y_min,
                    x_max=det.box.x_max,
                    y_max=det.box.y_max,
                    feature_ref=det.feature_ref,
                )

    _write_lines(path, records())


def read_gt(path: PathLike, vocab: VocabularySet) -> Tuple[List[GtRelationship], List[GtAttribute]]:
    path = Path(path)
    relationships: List[GtRelationship] = []
    attributes: List[GtAttribute] = []

    for lineno, line in _iter_lines(path):
        try:
            record = _GT_ADAPTER.validate_json(line)
        except ValidationError as exc:
            raise DatasetFormatError(f"malformed ground-truth record: {exc}", path, lineno) from None

        try:
            if isinstance(record, RelationshipRecord):
                predicate = vocab.predicates.index(record.predicate)
                if predicate == 0:
                    raise DatasetFormatError(f"predicate {NO_RELATIONSHIP!r} is not allowed in ground truth")
                relationships.append(
                    GtRelationship(
                        image_id=record.image_id,
                        subject_label=vocab.objects.index(record.subject_label),
                        subject_box=_box_from(record.subject_box, path, lineno),
                        object_label=vocab.objects.index(record.object_label),
                        object_box=_box_from(record.object_box, path, lineno),
                        predicate=predicate,
                    )
                )
            else:
                attribute = vocab.attributes.index(record.attribute)
                if attribute == 0:
                    raise DatasetFormatError(f"attribute {NO_ATTRIBUTE!r} is not allowed in ground truth")
                attributes.append(
                    GtAttribute(
                        image_id=record.image_id,
                        object_label=vocab.objects.index(record.object_label),
                        object_box=_box_from(record.object_box, path, lineno),
                        attribute=attribute,
                    )
                )
        except DatasetFormatError as exc:
            if exc.path is not None:
                raise
            raise DatasetFormatError(str(exc), path, lineno) from None

    logger.debug(f"Read {len(relationships)} relationships and {len(attributes)} attributes from {path}")
    return relationships, attributes


def write_gt(
    path: PathLike,
    relationships: Iterable[GtRelationship],
    attributes: Iterable[GtAttribute],
    vocab: VocabularySet,
) -> None:
    def records() -> Iterator[BaseModel]:
        for rel in relationships:
            yield RelationshipRecord(
                image_id=rel.image_id,
                subject_label=vocab.objects.name(rel.subject_label),
                subject_box=list(rel.subject_box.as_tuple()),
                object_label=vocab.objects.name(rel.object_label),
                object_box=list(rel.object_box.as_tuple()),
                predicate=vocab.predicates.name(rel.predicate),
            )
        for attr in attributes:
            yield AttributeRecord(
                image_id=attr.image_id,
                object_label=vocab.objects.name(attr.object_label),
                object_box=list(attr.object_box.as_tuple()),
                attribute=vocab.attributes.name(attr.attribute),
            )

    _write_lines(path, records())


def read_pair_features(path: PathLike) -> PairFeatureIndex:
    path = Path(path)
    index = PairFeatureIndex()
    for lineno, line in _iter_lines(path):
        try:
            record = PairFeatureRecord.model_validate_json(line)
            index.add(record.image_id, record.subject_index, record.object_index, record.feature_ref)
        except ValidationError as exc:
            raise DatasetFormatError(f"malformed pair-feature record: {exc}", path, lineno) from None
        except DatasetFormatError as exc:
            raise DatasetFormatError(str(exc), path, lineno) from None
    return index


def write_pair_features(path: PathLike, index: PairFeatureIndex) -> None:
    _write_lines(
        path,
        (
            PairFeatureRecord(image_id=image_id, subject_index=i, object_index=j, feature_ref=ref)
            for (image_id, i, j), ref in index.items()
        ),
    )


# ---------------------------------------------------------------------------
# Dataset directory
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    images: Dict[str, ImageDetections]
    features: FeatureStore
    pair_index: PairFeatureIndex
    relationships: List[GtRelationship]
    attributes: List[GtAttribute]


def validate_feature_refs(
    images: Dict[str, ImageDetections],
    features: FeatureStore,
    pair_index: PairFeatureIndex,
) -> None:
    """Every detection and pair feature_ref must resolve to a store row."""
    for image in images.values():
        for position, det in enumerate(image.detections):
            if det.feature_ref is not None and not features.has(det.feature_ref):
                raise DatasetFormatError(
                    f"detection {position} of image {image.image_id!r} references missing feature row {det.feature_ref}"
                )
    for (image_id, i, j), ref in pair_index.items():
        image = images.get(image_id)
        if image is None or max(i, j) >= len(image):
            raise DatasetFormatError(f"pair feature ({i}, {j}) of image {image_id!r} names an unknown detection")
        if not features.has(ref):
            raise DatasetFormatError(f"pair feature ({i}, {j}) of image {image_id!r} references missing row {ref}")


def load_dataset(directory: PathLike, vocab: VocabularySet, with_gt: bool = True) -> Dataset:
    directory = Path(directory)
    images = read_detections(directory / DETECTIONS_FILE, vocab.objects)
    features = read_features(directory / FEATURES_FILE)
    pair_path = directory / PAIR_FEATURES_FILE
    pair_index = read_pair_features(pair_path) if pair_path.exists() else PairFeatureIndex()
    validate_feature_refs(images, features, pair_index)

    relationships: List[GtRelationship] = []
    attributes: List[GtAttribute] = []
    if with_gt:
        relationships, attributes = read_gt(directory / GT_FILE, vocab)

    logger.info(
        f"Loaded dataset {directory}: {len(images)} images, {features.count} feature rows, "
        f"{len(relationships)} relationships, {len(attributes)} attributes"
    )
    return Dataset(images, features, pair_index, relationships, attributes)
