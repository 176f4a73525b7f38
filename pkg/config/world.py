"""
Synthetic world definition: vocabularies, relation templates and attribute tables.

The generator in services.synthetic_world reads everything from here, so a
world can be swapped out in tests by building another WorldConfig.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple


NO_RELATIONSHIP = "no_relationship"
NO_ATTRIBUTE = "no_attribute"

# Predicates decided purely by box geometry; everything else is an interaction.
GEOMETRIC_PREDICATES: Tuple[str, ...] = ("above", "under", "inside_of")

OBJECT_NAMES: Tuple[str, ...] = (
    "man",
    "woman",
    "dog",
    "guitar",
    "cup",
    "table",
    "bottle",
    "box",
    "hat",
    "ball",
)

PREDICATE_NAMES: Tuple[str, ...] = (
    NO_RELATIONSHIP,
    "above",
    "under",
    "inside_of",
    "at",
    "holds",
    "plays",
    "interacts_with",
    "wears",
    "hits",
)

ATTRIBUTE_NAMES: Tuple[str, ...] = (
    NO_ATTRIBUTE,
    "wooden",
    "plastic",
    "transparent",
    "leather",
    "textile",
)


@dataclass(frozen=True)
class RelationTemplate:
    """A (subject, object) label pair with its predicate distribution.

    `weight` is the relative frequency of the template when an image picks
    its next subject/object group.
    """

    subject: str
    object: str
    predicates: Tuple[Tuple[str, float], ...]
    weight: float = 1.0


@dataclass(frozen=True)
class AttributeSpec:
    """Attribute distribution for one object label."""

    label: str
    probability: float
    attributes: Tuple[Tuple[str, float], ...]


@dataclass(frozen=True)
class WorldConfig:
    objects: Tuple[str, ...] = OBJECT_NAMES
    predicates: Tuple[str, ...] = PREDICATE_NAMES
    attributes: Tuple[str, ...] = ATTRIBUTE_NAMES
    templates: Tuple[RelationTemplate, ...] = ()
    attribute_specs: Tuple[AttributeSpec, ...] = ()
    # Prototypes depend on this seed only, so train and test splits share them.
    prototype_seed: int = 7
    object_noise: float = 0.3
    pair_noise: float = 0.3
    box_jitter: float = 0.02
    min_detection_score: float = 0.7
    image_width_range: Tuple[int, int] = (480, 800)
    image_height_range: Tuple[int, int] = (360, 600)

    def attribute_spec(self, label: str) -> AttributeSpec | None:
        for spec in self.attribute_specs:
            if spec.label == label:
                return spec
        return None


DEFAULT_TEMPLATES: Tuple[RelationTemplate, ...] = (
    # Interactions: label bias plus a visual cue in the pair feature.
    RelationTemplate("man", "guitar", (("plays", 0.75), ("holds", 0.25)), weight=1.0),
    RelationTemplate("woman", "guitar", (("plays", 0.5), ("holds", 0.5)), weight=0.6),
    RelationTemplate("man", "cup", (("holds", 0.8), ("interacts_with", 0.2)), weight=0.8),
    RelationTemplate("woman", "bottle", (("holds", 0.6), ("interacts_with", 0.4)), weight=0.8),
    RelationTemplate("man", "hat", (("wears", 0.9), ("holds", 0.1)), weight=0.7),
    RelationTemplate("dog", "ball", (("hits", 0.5), ("interacts_with", 0.5)), weight=0.7),
    RelationTemplate("woman", "table", (("at", 0.7), ("interacts_with", 0.3)), weight=0.6),
    # Geometry: label bias only, the layout decides.
    RelationTemplate("cup", "table", (("above", 0.7), ("under", 0.3)), weight=1.0),
    RelationTemplate("bottle", "table", (("above", 0.5), ("under", 0.5)), weight=0.8),
    RelationTemplate("ball", "box", (("inside_of", 0.6), ("above", 0.4)), weight=0.8),
    RelationTemplate("dog", "table", (("under", 0.8), ("above", 0.2)), weight=0.8),
    RelationTemplate("cup", "box", (("inside_of", 0.7), ("above", 0.3)), weight=0.6),
)

DEFAULT_ATTRIBUTE_SPECS: Tuple[AttributeSpec, ...] = (
    AttributeSpec("table", 0.6, (("wooden", 0.8), ("plastic", 0.2))),
    AttributeSpec("guitar", 0.6, (("wooden", 1.0),)),
    AttributeSpec("cup", 0.6, (("plastic", 0.4), ("transparent", 0.6))),
    AttributeSpec("bottle", 0.6, (("transparent", 0.7), ("plastic", 0.3))),
    AttributeSpec("box", 0.6, (("wooden", 0.5), ("plastic", 0.5))),
    AttributeSpec("ball", 0.6, (("leather", 0.6), ("plastic", 0.4))),
    AttributeSpec("hat", 0.6, (("textile", 0.7), ("leather", 0.3))),
)

DEFAULT_WORLD = WorldConfig(
    templates=DEFAULT_TEMPLATES,
    attribute_specs=DEFAULT_ATTRIBUTE_SPECS,
)
