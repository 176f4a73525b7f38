"""
Full-scale synthetic acceptance run (2000 train / 500 held-out images).

Deselected by default; run with `pytest -m slow`.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict

import numpy as np
import pytest

from features.pair_featurizer import PairFeaturizer
from features.semantic_freq import load_freq_table
from main import main
from models.attribute_model import AttributeModel, attribute_batch
from models.fusion_model import FusionModel
from models.sampling import sample_attributes, sample_pairs
from services.dataset_io import GT_FILE, Dataset, load_dataset
from services.synthetic_world import default_vocabularies

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def run(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("acceptance")
    train, test, freq = root / "train", root / "test", root / "freq.json"
    assert main(["synth", "--out", str(train), "--n-images", "2000", "--seed", "1"]) == 0
    assert main(["synth", "--out", str(test), "--n-images", "500", "--seed", "2"]) == 0
    assert main(["build-freq", "--data", str(train), "--out", str(freq)]) == 0

    assert main(["train-rel", "--data", str(train), "--freq", str(freq), "--out", str(root / "rel.bin")]) == 0
    assert main([
        "train-rel", "--data", str(train), "--freq", str(freq), "--out", str(root / "rel_nospt.bin"), "--no-spatial",
    ]) == 0
    assert main([
        "train-rel", "--data", str(train), "--freq", str(freq), "--out", str(root / "rel_spo.bin"),
        "--no-spatial", "--no-solo-heads",
    ]) == 0
    assert main(["train-attr", "--data", str(train), "--out", str(root / "attr.bin")]) == 0

    variants = {
        "full": ["--rel-model", str(root / "rel.bin"), "--attr-model", str(root / "attr.bin")],
        "no_spatial": ["--rel-model", str(root / "rel_nospt.bin"), "--attr-model", str(root / "attr.bin")],
        "spo": ["--rel-model", str(root / "rel_spo.bin"), "--attr-model", str(root / "attr.bin")],
        "baseline": ["--baseline", "--attr-model", str(root / "attr.bin")],
    }
    for name, flags in variants.items():
        predictions = root / f"{name}.jsonl"
        assert main(["infer", "--data", str(test), "--freq", str(freq), "--out", str(predictions), *flags]) == 0
        assert main([
            "eval", "--predictions", str(predictions), "--gt", str(test / GT_FILE), "--out", str(root / f"{name}.json"),
        ]) == 0
    return root


def _reports(root: Path) -> Dict[str, dict]:
    return {name: json.loads((root / f"{name}.json").read_text()) for name in ("full", "no_spatial", "spo", "baseline")}


@pytest.fixture(scope="module")
def held_out(run: Path) -> Dataset:
    return load_dataset(run / "test", default_vocabularies())


def test_recall_on_held_out_images(run: Path) -> None:
    assert _reports(run)["full"]["recall_at_k"] >= 0.90


def test_ablation_ordering(run: Path) -> None:
    reports = _reports(run)
    assert reports["full"]["final_score"] >= reports["no_spatial"]["final_score"]
    assert reports["no_spatial"]["final_score"] >= reports["baseline"]["final_score"]


def test_semantic_and_visual_fusion_beats_frequency_baseline(run: Path) -> None:
    reports = _reports(run)
    assert 0.0 <= reports["spo"]["final_score"] <= 1.0
    assert reports["spo"]["final_score"] >= reports["baseline"]["final_score"]


def test_spatial_branch_matters_on_geometric_predicates(run: Path) -> None:
    reports = _reports(run)
    ap = {name: {c["name"]: c["ap_rel"] for c in r["per_class"]} for name, r in reports.items()}
    geometric = ["above", "under", "inside_of"]
    assert np.mean([ap["full"][p] for p in geometric]) > np.mean([ap["no_spatial"][p] for p in geometric])


def test_above_pairs_are_recognized(run: Path, held_out: Dataset) -> None:
    vocab = default_vocabularies()
    model = FusionModel.load(run / "rel.bin")
    freq = load_freq_table(run / "freq.json", vocab).with_alpha(1.0)
    featurizer = PairFeaturizer(held_out.features, held_out.pair_index, freq)

    above = vocab.predicates.index("above")
    samples = [s for s in sample_pairs(held_out.images, held_out.relationships, 0) if s.target == above]
    assert samples
    probs = model.predict_proba(featurizer.batch(held_out.images, samples))
    assert float(np.mean(probs.argmax(axis=1) == above)) >= 0.90


def test_attributes_are_recognized(run: Path, held_out: Dataset) -> None:
    model = AttributeModel.load(run / "attr.bin")
    samples = sample_attributes(held_out.images, held_out.attributes, 0)
    assert samples
    batch = attribute_batch(held_out.images, held_out.features, samples)
    assert float(np.mean(model.predict_proba(batch).argmax(axis=1) == batch.targets)) >= 0.90
