"""
Empirical predicate distribution p(P | S, O).

The table counts ground-truth triples per (subject label, object label) key.
Probabilities are recomputed from counts on every construction, so the file
format only carries counts and the smoothing alpha.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, ValidationError

from config import settings
from core.errors import PipelineError
from services.dataset_io import DatasetFormatError, GtRelationship, VocabularySet

LabelKey = Tuple[int, int]


class FreqTableError(PipelineError):
    """Raised for invalid smoothing or count vectors."""


class FreqTable:
    """Per (subject, object) predicate counts with additive smoothing."""

    def __init__(
        self,
        counts: Dict[LabelKey, np.ndarray],
        num_classes: int,
        alpha: float = 0.0,
        predicate_names: Iterable[str] = (),
    ):
        if num_classes < 1:
            raise FreqTableError(f"num_classes must be positive, got {num_classes}")
        if alpha < 0 or not np.isfinite(alpha):
            raise FreqTableError(f"smoothing alpha must be a finite non-negative number, got {alpha}")
        self.num_classes = num_classes
        self.alpha = float(alpha)
        self.predicate_names = tuple(predicate_names)

        self._counts: Dict[LabelKey, np.ndarray] = {}
        self._probs: Dict[LabelKey, np.ndarray] = {}
        for key, vector in counts.items():
            vector = np.array(vector, dtype=np.float64)
            if vector.shape != (num_classes,):
                raise FreqTableError(f"count vector for {key} has shape {vector.shape}, expected ({num_classes},)")
            if np.any(vector < 0):
                raise FreqTableError(f"count vector for {key} has negative entries")
            if vector[0] != 0:
                raise FreqTableError(f"count vector for {key} counts no_relationship")
            vector.setflags(write=False)
            self._counts[key] = vector
            self._probs[key] = self._smooth(vector)

        self._uniform = np.full(num_classes, 1.0 / num_classes)
        self._uniform.setflags(write=False)

    def _smooth(self, counts: np.ndarray) -> np.ndarray:
        denominator = counts.sum() + self.alpha * self.num_classes
        if denominator == 0:
            probs = np.full(self.num_classes, 1.0 / self.num_classes)
        else:
            probs = (counts + self.alpha) / denominator
        probs.setflags(write=False)
        return probs

    @property
    def keys(self) -> List[LabelKey]:
        return sorted(self._counts)

    def __contains__(self, key: object) -> bool:
        return key in self._counts

    def __len__(self) -> int:
        return len(self._counts)

    def counts(self, s_label: int, o_label: int) -> np.ndarray:
        vector = self._counts.get((s_label, o_label))
        return vector if vector is not None else np.zeros(self.num_classes)

    def probabilities(self, s_label: int, o_label: int) -> np.ndarray:
        """Probability vector for a key; uniform for keys never seen in training."""
        return self._probs.get((s_label, o_label), self._uniform)

    def with_alpha(self, alpha: float) -> "FreqTable":
        """Same counts, re-smoothed with another alpha."""
        return FreqTable(self._counts, self.num_classes, alpha, self.predicate_names)


def build_freq_table(
    relationships: Iterable[GtRelationship],
    vocab: VocabularySet,
    alpha: Optional[float] = None,
) -> FreqTable:
    num_classes = len(vocab.predicates)
    counts: Dict[LabelKey, np.ndarray] = {}
    total = 0
    for rel in relationships:
        key = (rel.subject_label, rel.object_label)
        if key not in counts:
            counts[key] = np.zeros(num_classes, dtype=np.float64)
        counts[key][rel.predicate] += 1
        total += 1

    alpha = settings.freq_alpha_baseline if alpha is None else alpha
    table = FreqTable(counts, num_classes, alpha, vocab.predicates.names)
    logger.info(f"Frequency table built from {total} triples: {len(table)} label pairs, alpha={alpha}")
    return table


def semantic_logits(table: FreqTable, s_label: int, o_label: int, eps: Optional[float] = None) -> np.ndarray:
    """log(max(p, eps)) per predicate class."""
    eps = settings.logit_eps if eps is None else eps
    return np.log(np.maximum(table.probabilities(s_label, o_label), eps))


def baseline_predict(table: FreqTable, s_label: int, o_label: int) -> Tuple[int, np.ndarray]:
    """Argmax predicate (lowest index wins ties) and the table's probabilities."""
    probs = table.probabilities(s_label, o_label)
    return int(np.argmax(probs)), probs


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


class FreqEntry(BaseModel):
    subject: int = Field(ge=0)
    object: int = Field(ge=0)
    counts: List[int]


class FreqTableFile(BaseModel):
    alpha: float = Field(ge=0.0)
    num_classes: int = Field(ge=1)
    predicates: List[str] = Field(default_factory=list)
    entries: List[FreqEntry] = Field(default_factory=list)


def save_freq_table(path: Union[str, Path], table: FreqTable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = FreqTableFile(
        alpha=table.alpha,
        num_classes=table.num_classes,
        predicates=list(table.predicate_names),
        entries=[
            FreqEntry(subject=s, object=o, counts=[int(c) for c in table.counts(s, o)])
            for s, o in table.keys
        ],
    )
    path.write_text(document.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Frequency table written to {path}")


def load_freq_table(path: Union[str, Path], vocab: Optional[VocabularySet] = None) -> FreqTable:
    path = Path(path)
    try:
        document = FreqTableFile.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise DatasetFormatError(f"malformed frequency table: {exc}", path) from None

    if vocab is not None:
        if document.num_classes != len(vocab.predicates):
            raise DatasetFormatError(
                f"table has {document.num_classes} predicate classes, vocabulary has {len(vocab.predicates)}", path
            )
        if document.predicates and tuple(document.predicates) != vocab.predicates.names:
            raise DatasetFormatError("table predicate names differ from the predicate vocabulary", path)

    counts: Dict[LabelKey, np.ndarray] = {}
    for entry in document.entries:
        key = (entry.subject, entry.object)
        if key in counts:
            raise DatasetFormatError(f"duplicate entry for label pair {key}", path)
        counts[key] = np.asarray(entry.counts, dtype=np.float64)
    try:
        return FreqTable(counts, document.num_classes, document.alpha, document.predicates)
    except FreqTableError as exc:
        raise DatasetFormatError(str(exc), path) from None
