"""
Geometry primitives and detection records.

Boxes are axis-aligned, in pixel coordinates with the origin at the top-left
corner of the image. Every type validates itself on construction, so the
operations below never see a degenerate box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import PipelineError


class InvalidBoxError(PipelineError):
    """Raised when a box, image size or detection violates its invariants."""


def _require_finite(name: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise InvalidBoxError(f"{name} has a non-finite coordinate: {values}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box (x_min, y_min, x_max, y_max) in pixels."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        _require_finite("Box", self.x_min, self.y_min, self.x_max, self.y_max)
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidBoxError(
                f"Box must have positive width and height, got "
                f"({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class CenterBox:
    """Center parameterization (x, y, w, h) used by box deltas."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        _require_finite("CenterBox", self.x, self.y, self.w, self.h)
        if not (self.w > 0 and self.h > 0):
            raise InvalidBoxError(f"CenterBox must have w > 0 and h > 0, got w={self.w}, h={self.h}")

    def to_box(self) -> Box:
        half_w = self.w / 2
        half_h = self.h / 2
        return Box(self.x - half_w, self.y - half_h, self.x + half_w, self.y + half_h)


@dataclass(frozen=True)
class ImageSize:
    w: float
    h: float

    def __post_init__(self) -> None:
        _require_finite("ImageSize", self.w, self.h)
        if not (self.w > 0 and self.h > 0):
            raise InvalidBoxError(f"ImageSize must be positive, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Detection:
    """A single detector output: label, confidence and box.

    `feature_ref` indexes the row holding this detection's pooled visual
    feature in a FeatureStore.
    """

    image_id: str
    label: int
    score: float
    box: Box
    feature_ref: Optional[int] = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise InvalidBoxError(f"Detection score must lie in [0, 1], got {self.score}")
        if self.label < 0:
            raise InvalidBoxError(f"Detection label must be non-negative, got {self.label}")
        if self.feature_ref is not None and self.feature_ref < 0:
            raise InvalidBoxError(f"feature_ref must be non-negative, got {self.feature_ref}")


def to_center(box: Box) -> CenterBox:
    return CenterBox(
        x=(box.x_min + box.x_max) / 2,
        y=(box.y_min + box.y_max) / 2,
        w=box.x_max - box.x_min,
        h=box.y_max - box.y_min,
    )


def _intersection(a: Box, b: Box) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    inter = _intersection(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def intersects(a: Box, b: Box) -> bool:
    """True when the boxes share a region of positive area."""
    return _intersection(a, b) > 0.0


def union_box(a: Box, b: Box) -> Box:
    """Tight box enclosing both inputs; used as the predicate ROI."""
    return Box(
        min(a.x_min, b.x_min),
        min(a.y_min, b.y_min),
        max(a.x_max, b.x_max),
        max(a.y_max, b.y_max),
    )


def contains(outer: Box, inner: Box) -> bool:
    return (
        outer.x_min <= inner.x_min
        and outer.y_min <= inner.y_min
        and outer.x_max >= inner.x_max
        and outer.y_max >= inner.y_max
    )
