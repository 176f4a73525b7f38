from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from core.geometry import Box, Detection, ImageSize
from features.pair_featurizer import MissingFeatureError, PairBatch, PairFeaturizer, TrainPair
from features.semantic_freq import FreqTable
from features.spatial_encoder import spatial_feature
from models.attribute_model import AttributeModel, attribute_scores, init_attribute_model
from models.fusion_model import FusionModel, forward, init_model, predict_predicate
from models.mlp import DimensionMismatchError, MlpParams
from models.sampling import sample_pairs
from services.checkpoint_store import CheckpointFormatError
from services.dataset_io import ImageDetections, PairFeatureIndex
from services.feature_store import FeatureStore
from services.synthetic_world import default_vocabularies, synth_world


def _zero(model: FusionModel) -> None:
    for branch in model.branches().values():
        for layer in branch.layers:
            layer.weight[:] = 0.0
            layer.bias[:] = 0.0


def _pair(rng: np.random.Generator, k: int, d: int) -> TrainPair:
    return TrainPair(
        spatial=rng.normal(size=22),
        v_s=rng.normal(size=d),
        v_p=rng.normal(size=d),
        v_o=rng.normal(size=d),
        sem_logits=rng.normal(size=k),
    )


def _scene(d: int = 4) -> tuple:
    rng = np.random.default_rng(0)
    image = ImageDetections(
        "img",
        ImageSize(100, 100),
        (
            Detection("img", 0, 0.9, Box(10, 10, 40, 40), feature_ref=0),
            Detection("img", 1, 0.8, Box(50, 50, 90, 90), feature_ref=1),
        ),
    )
    store = FeatureStore(rng.normal(size=(3, d)))
    index = PairFeatureIndex({("img", 0, 1): 2})
    return image, store, index


def test_init_is_deterministic_and_shaped() -> None:
    a = init_model(10, 64, spatial_hidden=(64, 64), visual_hidden=(16, 16), seed=4)
    b = init_model(10, 64, spatial_hidden=(64, 64), visual_hidden=(16, 16), seed=4)
    c = init_model(10, 64, spatial_hidden=(64, 64), visual_hidden=(16, 16), seed=5)

    assert [layer.weight.shape for layer in a.spatial.layers] == [(22, 64), (64, 64), (64, 10)]
    assert a.visual.input_dim == 3 * 64
    assert a.subject_head.sizes == (64, 10)
    for name in a.branches():
        for la, lb in zip(a.branches()[name].layers, b.branches()[name].layers):
            np.testing.assert_array_equal(la.weight, lb.weight)
            assert not la.bias.any()
    assert any(
        not np.array_equal(la.weight, lc.weight)
        for name in a.branches()
        for la, lc in zip(a.branches()[name].layers, c.branches()[name].layers)
    )


def test_zero_branches_with_uniform_prior_give_uniform_probs() -> None:
    model = init_model(5, 3, spatial_hidden=(4,), visual_hidden=(4,), seed=0)
    _zero(model)
    pair = TrainPair(np.ones(22), np.ones(3), np.ones(3), np.ones(3), np.full(5, np.log(0.2)))
    _, probs = forward(model, pair)
    np.testing.assert_allclose(probs, np.full(5, 0.2))


def test_probs_normalized_and_shift_invariant() -> None:
    rng = np.random.default_rng(1)
    model = init_model(6, 5, spatial_hidden=(8,), visual_hidden=(8,), seed=2)
    for _ in range(50):
        pair = _pair(rng, 6, 5)
        logits, probs = forward(model, pair)
        assert logits.shape == (6,)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)
        assert np.all(probs > 0)

        shifted = TrainPair(pair.spatial, pair.v_s, pair.v_p, pair.v_o, pair.sem_logits + 123.0)
        np.testing.assert_allclose(forward(model, shifted)[1], probs, rtol=0, atol=1e-9)


def test_branch_mismatch_is_named() -> None:
    rng = np.random.default_rng(0)
    with pytest.raises(DimensionMismatchError, match="visual"):
        FusionModel(
            spatial=MlpParams.init((22, 4, 5), rng),
            visual=MlpParams.init((10, 4, 5), rng),
            subject_head=MlpParams.init((3, 5), rng),
            object_head=MlpParams.init((3, 5), rng),
        )

    model = init_model(5, 3, spatial_hidden=(4,), visual_hidden=(4,), seed=0)
    bad = PairBatch.from_pairs([_pair(rng, 5, 4)])
    with pytest.raises(DimensionMismatchError, match="visual"):
        model.logits(bad)


def test_checkpoint_round_trip(tmp_path: Path) -> None:
    model = init_model(4, 3, spatial_hidden=(5, 5), visual_hidden=(6,), seed=9, use_solo_heads=False)
    path = tmp_path / "rel.bin"
    model.save(path)
    loaded = FusionModel.load(path)

    assert loaded.use_spatial and not loaded.use_solo_heads
    assert (loaded.num_classes, loaded.feature_dim) == (4, 3)
    for name, branch in model.branches().items():
        for original, restored in zip(branch.layers, loaded.branches()[name].layers):
            np.testing.assert_array_equal(original.weight, restored.weight)
            np.testing.assert_array_equal(original.bias, restored.bias)
            assert original.activation == restored.activation

    with pytest.raises(CheckpointFormatError):
        AttributeModel.load(path)


def test_truncated_checkpoint_rejected(tmp_path: Path) -> None:
    path = tmp_path / "rel.bin"
    init_model(4, 3, spatial_hidden=(5,), visual_hidden=(6,), seed=1).save(path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointFormatError, match="truncated"):
        FusionModel.load(path)


def test_predict_predicate_follows_dominant_prior() -> None:
    image, store, index = _scene()
    counts = np.zeros(6)
    counts[3] = 100
    freq = FreqTable({(0, 1): counts}, num_classes=6, alpha=0.0)
    model = init_model(6, 4, spatial_hidden=(4,), visual_hidden=(4,), seed=0)
    _zero(model)

    s_p, probs = predict_predicate(model, PairFeaturizer(store, index, freq), image, 0, 1)
    assert int(np.argmax(probs)) == 3
    assert probs.sum() == pytest.approx(1.0, abs=1e-6)
    assert s_p[0] == 0.0
    np.testing.assert_array_equal(s_p[1:], probs[1:])


def test_missing_pair_feature_raises() -> None:
    image, store, _ = _scene()
    freq = FreqTable({}, num_classes=6)
    featurizer = PairFeaturizer(store, PairFeatureIndex(), freq)
    with pytest.raises(MissingFeatureError):
        featurizer.pair(image, 0, 1)


def test_featurizer_batch_matches_single_pairs() -> None:
    image, store, index = _scene()
    freq = FreqTable({(0, 1): np.array([0, 1, 2, 0, 0, 0])}, num_classes=6, alpha=1.0)
    featurizer = PairFeaturizer(store, index, freq)
    batch = featurizer.image_batch(image, [(0, 1), (1, 0)])
    single = featurizer.pair(image, 1, 0)

    assert len(batch) == 2
    np.testing.assert_array_equal(batch.spatial[1], single.spatial)
    np.testing.assert_array_equal(batch.v_p[0], batch.v_p[1])
    np.testing.assert_array_equal(batch.v_s[1], single.v_s)
    np.testing.assert_array_equal(batch.sem_logits[1], single.sem_logits)



def test_featurizer_batch_spans_images() -> None:
    vocab = default_vocabularies()
    world = synth_world(2, 4, 3, vocab, feature_dim=4)
    freq = FreqTable({}, num_classes=len(vocab.predicates))
    samples = sample_pairs(world.images, world.relationships, 100.0, seed=2)
    samples = [samples[i] for i in np.random.default_rng(0).permutation(len(samples))]

    batch = PairFeaturizer(world.features, world.pair_index, freq).batch(world.images, samples)
    assert len({s.image_id for s in samples}) > 1
    for row, sample in enumerate(samples):
        image = world.images[sample.image_id]
        expected = spatial_feature(
            image.detections[sample.subject_index].box, image.detections[sample.object_index].box, image.size
        )
        np.testing.assert_array_equal(batch.spatial[row], expected)

def test_attribute_scores() -> None:
    model = init_attribute_model(4, 3, hidden=5, seed=0)
    probs = attribute_scores(model, np.array([0.3, -1.0, 2.0]))
    assert probs.shape == (4,)
    assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    for layer in model.head.layers:
        layer.weight[:] = 0.0
    np.testing.assert_allclose(attribute_scores(model, np.ones(3)), np.full(4, 0.25))

    with pytest.raises(DimensionMismatchError):
        attribute_scores(model, np.ones(2))
