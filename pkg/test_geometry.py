from __future__ import annotations

import math

import pytest

from core.geometry import (
    Box,
    CenterBox,
    Detection,
    ImageSize,
    InvalidBoxError,
    contains,
    intersects,
    iou,
    to_center,
    union_box,
)


def test_to_center_examples() -> None:
    assert to_center(Box(0, 0, 10, 10)) == CenterBox(5, 5, 10, 10)
    assert to_center(Box(2, 4, 6, 8)) == CenterBox(4, 6, 4, 4)
    assert to_center(Box(0, 0, 1, 1)) == CenterBox(0.5, 0.5, 1, 1)


def test_center_box_round_trip() -> None:
    box = Box(3.5, 1.0, 9.0, 7.25)
    assert to_center(box).to_box() == box


def test_iou_examples() -> None:
    box = Box(0, 0, 10, 10)
    assert iou(box, box) == 1.0
    assert iou(box, Box(20, 20, 30, 30)) == 0.0
    assert iou(box, Box(0, 0, 10, 5)) == pytest.approx(0.5)


def test_iou_of_touching_boxes_is_zero() -> None:
    assert iou(Box(0, 0, 10, 10), Box(10, 0, 20, 10)) == 0.0
    assert not intersects(Box(0, 0, 10, 10), Box(10, 0, 20, 10))


def test_union_box() -> None:
    assert union_box(Box(0, 0, 10, 10), Box(5, 5, 20, 15)) == Box(0, 0, 20, 15)
    box = Box(1, 2, 3, 4)
    assert union_box(box, box) == box


def test_contains() -> None:
    outer = Box(0, 0, 10, 10)
    assert contains(outer, Box(2, 2, 5, 5))
    assert contains(outer, outer)
    assert not contains(Box(2, 2, 5, 5), outer)


@pytest.mark.parametrize(
    "coords",
    [
        (0, 0, 0, 10),
        (5, 0, 1, 10),
        (0, 0, math.inf, 1),
        (0, math.nan, 1, 1),
    ],
)
def test_invalid_boxes_are_rejected(coords: tuple) -> None:
    with pytest.raises(InvalidBoxError):
        Box(*coords)


def test_center_box_and_image_size_validation() -> None:
    with pytest.raises(InvalidBoxError):
        CenterBox(0, 0, 0, 1)
    with pytest.raises(InvalidBoxError):
        ImageSize(0, 10)
    assert ImageSize(20, 10).area == 200


def test_detection_validation() -> None:
    box = Box(0, 0, 1, 1)
    assert Detection("img", 3, 0.5, box).feature_ref is None
    with pytest.raises(InvalidBoxError):
        Detection("img", 3, 1.5, box)
    with pytest.raises(InvalidBoxError):
        Detection("img", -1, 0.5, box)
    with pytest.raises(InvalidBoxError):
        Detection("img", 0, 0.5, box, feature_ref=-2)
