"""
Synthetic world generator for desk-scale training and evaluation.

Each image is assembled from subject/object groups drawn from the relation
templates in config.world. Ground-truth predicates then follow fixed rules
over every ordered pair of boxes:

    1. inside_of  - the subject box lies inside the object box
    2. above      - boxes intersect, neither contains the other, and the
                    subject center is above the object's top edge
    3. under      - the mirror of `above`
    4. otherwise the interaction predicate drawn for a template pair, if any

Visual features are noisy prototypes: object rows carry their label (and
attribute) prototype, pair rows carry the mean of both labels plus the
interaction prototype for interacting pairs only. Geometric predicates get
no visual cue, so only the spatial encoding can recover them.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from loguru import logger

from config.world import DEFAULT_WORLD, GEOMETRIC_PREDICATES, RelationTemplate, WorldConfig
from core.errors import PipelineError
from core.geometry import Box, Detection, ImageSize, InvalidBoxError, contains, intersects

from .dataset_io import (
    DETECTIONS_FILE,
    FEATURES_FILE,
    GT_FILE,
    PAIR_FEATURES_FILE,
    GtAttribute,
    GtRelationship,
    ImageDetections,
    PairFeatureIndex,
    VocabularySet,
    write_detections,
    write_gt,
    write_pair_features,
    write_vocabularies,
)
from .feature_store import FeatureStore, write_features

_MAX_PLACEMENT_TRIES = 100


class WorldConfigError(PipelineError):
    """Raised for generator arguments or world definitions that cannot be realised."""


@dataclass(frozen=True)
class SyntheticDataset:
    vocab: VocabularySet
    images: Dict[str, ImageDetections]
    features: FeatureStore
    pair_index: PairFeatureIndex
    relationships: List[GtRelationship]
    attributes: List[GtAttribute]

    def write(self, directory: Union[str, Path]) -> None:
        """Write the standard dataset layout plus vocabulary files."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        write_detections(directory / DETECTIONS_FILE, self.images.values(), self.vocab.objects)
        write_features(directory / FEATURES_FILE, self.features)
        write_pair_features(directory / PAIR_FEATURES_FILE, self.pair_index)
        write_gt(directory / GT_FILE, self.relationships, self.attributes, self.vocab)
        write_vocabularies(directory, self.vocab)
        logger.info(f"Synthetic dataset written to {directory}")


def geometric_predicate(subject: Box, obj: Box) -> Optional[str]:
    """Predicate name implied by box geometry alone, or None."""
    if subject == obj:
        return None
    if contains(obj, subject):
        return "inside_of"
    if contains(subject, obj) or not intersects(subject, obj):
        return None
    if (subject.y_min + subject.y_max) / 2 < obj.y_min:
        return "above"
    if (obj.y_min + obj.y_max) / 2 < subject.y_min:
        return "under"
    return None


def _check_world(world: WorldConfig, vocab: VocabularySet) -> None:
    for template in world.templates:
        for label in (template.subject, template.object):
            if label not in vocab.objects:
                raise WorldConfigError(f"template object {label!r} is not in the object vocabulary")
        for predicate, _ in template.predicates:
            if predicate not in vocab.predicates or vocab.predicates.index(predicate) == 0:
                raise WorldConfigError(f"template predicate {predicate!r} is not a predicate class")
    for spec in world.attribute_specs:
        if spec.label not in vocab.objects:
            raise WorldConfigError(f"attribute spec for unknown object {spec.label!r}")
        for attribute, _ in spec.attributes:
            if attribute not in vocab.attributes or vocab.attributes.index(attribute) == 0:
                raise WorldConfigError(f"attribute {attribute!r} is not an attribute class")
    if not world.templates:
        raise WorldConfigError("world has no relation templates")


def _draw(rng: np.random.Generator, choices: Tuple[Tuple[str, float], ...]) -> str:
    names = [name for name, _ in choices]
    weights = np.array([weight for _, weight in choices], dtype=np.float64)
    return names[int(rng.choice(len(names), p=weights / weights.sum()))]


def _inside_image(box: Box, size: ImageSize) -> bool:
    return box.x_min >= 0 and box.y_min >= 0 and box.x_max <= size.w and box.y_max <= size.h


def _place_subject(rng: np.random.Generator, predicate: str, obj: Box, size: ImageSize) -> Box:
    ow, oh = obj.width, obj.height
    if predicate in ("above", "under"):
        sw = rng.uniform(0.3, 0.8) * ow
        sh = rng.uniform(0.3, 0.8) * oh
        x_min = rng.uniform(obj.x_min, obj.x_max - sw)
        if predicate == "above":
            y_max = obj.y_min + rng.uniform(0.1, 0.4) * sh
            return Box(x_min, y_max - sh, x_min + sw, y_max)
        y_min = obj.y_max - rng.uniform(0.1, 0.4) * sh
        return Box(x_min, y_min, x_min + sw, y_min + sh)
    if predicate == "inside_of":
        sw = rng.uniform(0.2, 0.6) * ow
        sh = rng.uniform(0.2, 0.6) * oh
        x_min = rng.uniform(obj.x_min, obj.x_max - sw)
        y_min = rng.uniform(obj.y_min, obj.y_max - sh)
        return Box(x_min, y_min, x_min + sw, y_min + sh)

    # Interactions sit side by side with a gap, so no geometric rule fires.
    sw = rng.uniform(0.6, 1.2) * ow
    sh = rng.uniform(0.6, 1.2) * oh
    gap = rng.uniform(0.01, 0.05) * size.w
    cy = (obj.y_min + obj.y_max) / 2 + rng.uniform(-0.2, 0.2) * oh
    if rng.random() < 0.5:
        x_max = obj.x_min - gap
        return Box(x_max - sw, cy - sh / 2, x_max, cy + sh / 2)
    x_min = obj.x_max + gap
    return Box(x_min, cy - sh / 2, x_min + sw, cy + sh / 2)


def _place_group(rng: np.random.Generator, predicate: str, size: ImageSize) -> Tuple[Box, Box]:
    subject = obj = None
    for _ in range(_MAX_PLACEMENT_TRIES):
        ow = rng.uniform(0.15, 0.35) * size.w
        oh = rng.uniform(0.15, 0.35) * size.h
        ox = rng.uniform(0.0, size.w - ow)
        oy = rng.uniform(0.0, size.h - oh)
        obj = Box(ox, oy, ox + ow, oy + oh)
        subject = _place_subject(rng, predicate, obj, size)
        if _inside_image(subject, size):
            break
    # Out of tries: keep the last layout; boxes may overflow the image.
    assert subject is not None and obj is not None
    return subject, obj


def _random_box(rng: np.random.Generator, size: ImageSize) -> Box:
    w = rng.uniform(0.1, 0.3) * size.w
    h = rng.uniform(0.1, 0.3) * size.h
    x = rng.uniform(0.0, size.w - w)
    y = rng.uniform(0.0, size.h - h)
    return Box(x, y, x + w, y + h)


def _jitter(rng: np.random.Generator, box: Box, scale: float) -> Box:
    noise = rng.normal(0.0, scale, size=4) * np.array([box.width, box.height, box.width, box.height])
    try:
        return Box(*(float(v) for v in np.array(box.as_tuple()) + noise))
    except InvalidBoxError:
        return box


class _Prototypes:
    """Fixed visual prototypes for labels, attributes and interaction predicates."""

    def __init__(self, world: WorldConfig, vocab: VocabularySet, dim: int):
        rng = np.random.default_rng(world.prototype_seed)
        self.objects = rng.normal(0.0, 1.0, size=(len(vocab.objects), dim))
        self.attributes = rng.normal(0.0, 1.0, size=(len(vocab.attributes), dim))
        self.attributes[0] = 0.0
        self.predicates = rng.normal(0.0, 1.0, size=(len(vocab.predicates), dim))
        self.predicates[0] = 0.0
        for name in GEOMETRIC_PREDICATES:
            if name in vocab.predicates:
                self.predicates[vocab.predicates.index(name)] = 0.0


def synth_world(
    seed: int,
    n_images: int,
    n_objects_per_image: int,
    vocab: VocabularySet,
    world: WorldConfig = DEFAULT_WORLD,
    feature_dim: int = 64,
    image_prefix: Optional[str] = None,
) -> SyntheticDataset:
    """Generate a deterministic synthetic dataset (pure function of its arguments)."""
    if n_objects_per_image < 2:
        raise WorldConfigError(f"n_objects_per_image must be at least 2, got {n_objects_per_image}")
    if n_images < 0:
        raise WorldConfigError(f"n_images must be non-negative, got {n_images}")
    if feature_dim < 1:
        raise WorldConfigError(f"feature_dim must be positive, got {feature_dim}")
    _check_world(world, vocab)

    rng = np.random.default_rng(seed)
    protos = _Prototypes(world, vocab, feature_dim)
    prefix = image_prefix if image_prefix is not None else f"img{seed}_"
    template_weights = np.array([t.weight for t in world.templates], dtype=np.float64)
    template_weights /= template_weights.sum()

    images: Dict[str, ImageDetections] = {}
    pair_index = PairFeatureIndex()
    relationships: List[GtRelationship] = []
    attributes: List[GtAttribute] = []
    rows: List[np.ndarray] = []

    for image_number in range(n_images):
        image_id = f"{prefix}{image_number:06d}"
        size = ImageSize(
            float(rng.integers(world.image_width_range[0], world.image_width_range[1] + 1)),
            float(rng.integers(world.image_height_range[0], world.image_height_range[1] + 1)),
        )

        # (label, box) per object, plus interaction predicates keyed by local positions
        objects: List[Tuple[int, Box]] = []
        interactions: Dict[Tuple[int, int], int] = {}
        for _ in range(n_objects_per_image // 2):
            template: RelationTemplate = world.templates[int(rng.choice(len(world.templates), p=template_weights))]
            predicate = _draw(rng, template.predicates)
            subject_box, object_box = _place_group(rng, predicate, size)
            s_pos, o_pos = len(objects), len(objects) + 1
            objects.append((vocab.objects.index(template.subject), subject_box))
            objects.append((vocab.objects.index(template.object), object_box))
            if predicate not in GEOMETRIC_PREDICATES:
                interactions[(s_pos, o_pos)] = vocab.predicates.index(predicate)
        if n_objects_per_image % 2:
            objects.append((int(rng.integers(len(vocab.objects))), _random_box(rng, size)))

        order = rng.permutation(len(objects))
        position = {int(old): new for new, old in enumerate(order)}
        objects = [objects[int(old)] for old in order]
        interactions = {(position[s], position[o]): p for (s, o), p in interactions.items()}

        for s, o in permutations(range(len(objects)), 2):
            name = geometric_predicate(objects[s][1], objects[o][1])
            predicate_index = vocab.predicates.index(name) if name and name in vocab.predicates else None
            if predicate_index is None:
                predicate_index = interactions.get((s, o))
            if predicate_index is not None:
                relationships.append(
                    GtRelationship(image_id, objects[s][0], objects[s][1], objects[o][0], objects[o][1], predicate_index)
                )

        detections: List[Detection] = []
        for label, box in objects:
            attribute = 0
            spec = world.attribute_spec(vocab.objects.name(label))
            if spec is not None and rng.random() < spec.probability:
                attribute = vocab.attributes.index(_draw(rng, spec.attributes))
                attributes.append(GtAttribute(image_id, label, box, attribute))

            feature_ref = len(rows)
            rows.append(
                protos.objects[label]
                + protos.attributes[attribute]
                + rng.normal(0.0, world.object_noise, size=feature_dim)
            )
            detections.append(
                Detection(
                    image_id=image_id,
                    label=label,
                    score=float(rng.uniform(world.min_detection_score, 1.0)),
                    box=_jitter(rng, box, world.box_jitter),
                    feature_ref=feature_ref,
                )
            )

        for a, b in combinations(range(len(objects)), 2):
            row = 0.5 * (protos.objects[objects[a][0]] + protos.objects[objects[b][0]])
            predicate_index = interactions.get((a, b), interactions.get((b, a)))
            if predicate_index is not None:
                row = row + protos.predicates[predicate_index]
            pair_index.add(image_id, a, b, len(rows))
            rows.append(row + rng.normal(0.0, world.pair_noise, size=feature_dim))

        images[image_id] = ImageDetections(image_id, size, tuple(detections))

    features = FeatureStore(np.vstack(rows) if rows else np.zeros((0, feature_dim)))
    logger.info(
        f"Synthesized {n_images} images (seed={seed}): {len(relationships)} relationships, "
        f"{len(attributes)} attributes, {features.count} feature rows"
    )
    return SyntheticDataset(vocab, images, features, pair_index, relationships, attributes)


def default_vocabularies(world: WorldConfig = DEFAULT_WORLD) -> VocabularySet:
    return VocabularySet.from_names(world.objects, world.predicates, world.attributes)
