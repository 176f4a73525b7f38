"""
Assembles relationship-model inputs for detection pairs.

A pair (s, o) of one image becomes the semantic logits of its label key,
the 22-d spatial encoding and three visual vectors: the subject row, the
union-box row from the pair sidecar, and the object row.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from core.errors import PipelineError
from services.dataset_io import ImageDetections, PairFeatureIndex
from services.feature_store import FeatureStore

from .semantic_freq import FreqTable, semantic_logits
from .spatial_encoder import SPATIAL_DIM, spatial_feature, spatial_features


class MissingFeatureError(PipelineError):
    """Raised when a detection or pair has no feature row."""


@dataclass(frozen=True)
class PairSample:
    """Index-level training example: a detection pair of one image and its target class."""

    image_id: str
    subject_index: int
    object_index: int
    target: int = 0


@dataclass(frozen=True)
class TrainPair:
    spatial: np.ndarray
    v_s: np.ndarray
    v_p: np.ndarray
    v_o: np.ndarray
    sem_logits: np.ndarray
    target: int = 0


@dataclass(frozen=True)
class PairBatch:
    """Row-stacked TrainPairs."""

    spatial: np.ndarray
    v_s: np.ndarray
    v_p: np.ndarray
    v_o: np.ndarray
    sem_logits: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    def subset(self, indices: np.ndarray) -> "PairBatch":
        return PairBatch(
            spatial=self.spatial[indices],
            v_s=self.v_s[indices],
            v_p=self.v_p[indices],
            v_o=self.v_o[indices],
            sem_logits=self.sem_logits[indices],
            targets=self.targets[indices],
        )

    @classmethod
    def from_pairs(cls, pairs: Sequence[TrainPair]) -> "PairBatch":
        if not pairs:
            raise ValueError("cannot stack an empty list of pairs")
        return cls(
            spatial=np.stack([p.spatial for p in pairs]),
            v_s=np.stack([p.v_s for p in pairs]),
            v_p=np.stack([p.v_p for p in pairs]),
            v_o=np.stack([p.v_o for p in pairs]),
            sem_logits=np.stack([p.sem_logits for p in pairs]),
            targets=np.array([p.target for p in pairs], dtype=np.int64),
        )


class PairFeaturizer:
    def __init__(self, features: FeatureStore, pair_index: PairFeatureIndex, freq: FreqTable):
        self.features = features
        self.pair_index = pair_index
        self.freq = freq
        self._logit_cache: Dict[Tuple[int, int], np.ndarray] = {}

    @property
    def feature_dim(self) -> int:
        return self.features.dim

    def _sem_logits(self, s_label: int, o_label: int) -> np.ndarray:
        key = (s_label, o_label)
        cached = self._logit_cache.get(key)
        if cached is None:
            cached = semantic_logits(self.freq, s_label, o_label)
            self._logit_cache[key] = cached
        return cached

    def _refs(self, image: ImageDetections, s: int, o: int) -> Tuple[int, int, int]:
        if s == o:
            raise ValueError(f"subject and object must be distinct detections, got {s} twice")
        s_ref = image.detections[s].feature_ref
        o_ref = image.detections[o].feature_ref
        if s_ref is None:
            raise MissingFeatureError(f"detection {s} of image {image.image_id!r} has no feature_ref")
        if o_ref is None:
            raise MissingFeatureError(f"detection {o} of image {image.image_id!r} has no feature_ref")
        p_ref = self.pair_index.lookup(image.image_id, s, o)
        if p_ref is None:
            raise MissingFeatureError(f"no union-box feature for pair ({s}, {o}) of image {image.image_id!r}")
        return s_ref, p_ref, o_ref

    def pair(self, image: ImageDetections, s: int, o: int, target: int = 0) -> TrainPair:
        s_ref, p_ref, o_ref = self._refs(image, s, o)
        det_s, det_o = image.detections[s], image.detections[o]
        return TrainPair(
            spatial=spatial_feature(det_s.box, det_o.box, image.size),
            v_s=self.features.row(s_ref),
            v_p=self.features.row(p_ref),
            v_o=self.features.row(o_ref),
            sem_logits=self._sem_logits(det_s.label, det_o.label).copy(),
            target=target,
        )

    def image_batch(self, image: ImageDetections, pairs: Sequence[Tuple[int, int]]) -> PairBatch:
        """Inputs for the given ordered pairs of one image, all with target 0."""
        return self._assemble([(image, s, o, 0) for s, o in pairs])

    def batch(self, images: Mapping[str, ImageDetections], samples: Sequence[PairSample]) -> PairBatch:
        entries = []
        for sample in samples:
            image = images.get(sample.image_id)
            if image is None:
                raise MissingFeatureError(f"sample references unknown image {sample.image_id!r}")
            entries.append((image, sample.subject_index, sample.object_index, sample.target))
        return self._assemble(entries)

    def _assemble(self, entries: List[Tuple[ImageDetections, int, int, int]]) -> PairBatch:
        n = len(entries)
        spatial = np.zeros((n, SPATIAL_DIM))
        sem = np.zeros((n, self.freq.num_classes))
        refs = np.zeros((n, 3), dtype=np.int64)
        targets = np.zeros(n, dtype=np.int64)
        rows_by_image: Dict[str, List[int]] = defaultdict(list)
        for row, (image, s, o, target) in enumerate(entries):
            refs[row] = self._refs(image, s, o)
            sem[row] = self._sem_logits(image.detections[s].label, image.detections[o].label)
            targets[row] = target
            rows_by_image[image.image_id].append(row)
        for rows in rows_by_image.values():
            image = entries[rows[0]][0]
            subjects = [image.detections[entries[r][1]].box for r in rows]
            objects = [image.detections[entries[r][2]].box for r in rows]
            spatial[rows] = spatial_features(subjects, objects, image.size)
        return PairBatch(
            spatial=spatial,
            v_s=self.features.take(refs[:, 0]),
            v_p=self.features.take(refs[:, 1]),
            v_o=self.features.take(refs[:, 2]),
            sem_logits=sem,
            targets=targets,
        )
