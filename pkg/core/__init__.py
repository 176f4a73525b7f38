"""Core package - geometry primitives and detection records"""
from .errors import PipelineError
from .geometry import (
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

__all__ = [
    "PipelineError",
    "Box",
    "CenterBox",
    "Detection",
    "ImageSize",
    "InvalidBoxError",
    "contains",
    "intersects",
    "iou",
    "to_center",
    "union_box",
]
