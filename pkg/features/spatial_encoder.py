"""
22-dimensional spatial encoding of a subject/object box pair.

    < delta(S, O), delta(S, P), delta(P, O), coords(S), coords(O) >

where P is the union box of S and O. Deltas are taken on center boxes:

    ((x1 - x2) / w2, (y1 - y2) / h2, log(w1 / w2), log(h1 / h2))
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from core.geometry import Box, CenterBox, ImageSize, to_center, union_box

SPATIAL_DIM = 22

# A (22,) float64 vector in the order documented above.
SpatialFeature = np.ndarray


def box_delta(b1: CenterBox, b2: CenterBox) -> np.ndarray:
    return np.array(
        [
            (b1.x - b2.x) / b2.w,
            (b1.y - b2.y) / b2.h,
            np.log(b1.w / b2.w),
            np.log(b1.h / b2.h),
        ],
        dtype=np.float64,
    )


def normalized_coords(box: Box, img: ImageSize) -> np.ndarray:
    return np.array(
        [
            box.x_min / img.w,
            box.y_min / img.h,
            box.x_max / img.w,
            box.y_max / img.h,
            box.area / img.area,
        ],
        dtype=np.float64,
    )


def spatial_feature(b_s: Box, b_o: Box, img: ImageSize) -> SpatialFeature:
    c_s = to_center(b_s)
    c_o = to_center(b_o)
    c_p = to_center(union_box(b_s, b_o))
    return np.concatenate(
        [
            box_delta(c_s, c_o),
            box_delta(c_s, c_p),
            box_delta(c_p, c_o),
            normalized_coords(b_s, img),
            normalized_coords(b_o, img),
        ]
    )


def spatial_features(subjects: Sequence[Box], objects: Sequence[Box], img: ImageSize) -> np.ndarray:
    """Stack spatial_feature over paired box lists into an (N, 22) array."""
    if len(subjects) != len(objects):
        raise ValueError(f"got {len(subjects)} subject boxes and {len(objects)} object boxes")
    if not subjects:
        return np.zeros((0, SPATIAL_DIM))
    return np.stack([spatial_feature(s, o, img) for s, o in zip(subjects, objects)])
