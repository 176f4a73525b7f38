from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import PipelineError
from features.pair_featurizer import PairFeaturizer
from features.semantic_freq import build_freq_table
from models.attribute_model import AttributeBatch, AttributeModel, init_attribute_model
from models.fusion_model import FusionModel, init_model
from models.sampling import sample_pairs
from models.trainer import TrainConfig, TrainingDivergedError, fit, train, train_attributes
from services.dataset_io import Dataset, VocabularySet, load_dataset
from services.synthetic_world import default_vocabularies, synth_world

FEATURE_DIM = 8


@pytest.fixture(scope="module")
def vocab() -> VocabularySet:
    return default_vocabularies()


@pytest.fixture(scope="module")
def dataset(tmp_path_factory: pytest.TempPathFactory, vocab: VocabularySet) -> Dataset:
    directory = tmp_path_factory.mktemp("train")
    synth_world(5, 150, 4, vocab, feature_dim=FEATURE_DIM).write(directory)
    return load_dataset(directory, vocab)


def _featurizer(dataset: Dataset, vocab: VocabularySet) -> PairFeaturizer:
    freq = build_freq_table(dataset.relationships, vocab, alpha=1.0)
    return PairFeaturizer(dataset.features, dataset.pair_index, freq)


def _model(vocab: VocabularySet, seed: int = 0) -> FusionModel:
    return init_model(len(vocab.predicates), FEATURE_DIM, spatial_hidden=(16,), visual_hidden=(16,), seed=seed)


def _parameters(model: FusionModel) -> list:
    return [
        (layer.weight.copy(), layer.bias.copy())
        for branch in model.branches().values()
        for layer in branch.layers
    ]


def test_zero_learning_rate_leaves_parameters(dataset: Dataset, vocab: VocabularySet) -> None:
    model = _model(vocab)
    before = _parameters(model)
    _, trace = train(model, dataset, _featurizer(dataset, vocab), TrainConfig(epochs=3, learning_rate=0.0, seed=1))

    for (w0, b0), (w1, b1) in zip(before, _parameters(model)):
        np.testing.assert_array_equal(w0, w1)
        np.testing.assert_array_equal(b0, b1)
    assert trace[0] == pytest.approx(trace[-1], rel=1e-9)


def test_training_is_seeded(dataset: Dataset, vocab: VocabularySet) -> None:
    config = TrainConfig(epochs=2, seed=7, batch_size=32)
    featurizer = _featurizer(dataset, vocab)
    a, trace_a = train(_model(vocab, seed=3), dataset, featurizer, config)
    b, trace_b = train(_model(vocab, seed=3), dataset, featurizer, config)

    assert trace_a == trace_b
    for (wa, ba), (wb, bb) in zip(_parameters(a), _parameters(b)):
        np.testing.assert_array_equal(wa, wb)
        np.testing.assert_array_equal(ba, bb)


def test_loss_decreases(dataset: Dataset, vocab: VocabularySet) -> None:
    _, trace = train(_model(vocab), dataset, _featurizer(dataset, vocab), TrainConfig(epochs=6, seed=2))
    assert len(trace) == 6
    assert all(np.isfinite(trace))
    assert trace[-1] < trace[0]


def test_disabled_branches_stay_frozen(dataset: Dataset, vocab: VocabularySet) -> None:
    model = init_model(
        len(vocab.predicates), FEATURE_DIM, spatial_hidden=(8,), visual_hidden=(8,), seed=0,
        use_spatial=False, use_solo_heads=False,
    )
    spatial = [layer.weight.copy() for layer in model.spatial.layers]
    subject = model.subject_head.layers[0].weight.copy()
    train(model, dataset, _featurizer(dataset, vocab), TrainConfig(epochs=1, seed=0))

    for original, layer in zip(spatial, model.spatial.layers):
        np.testing.assert_array_equal(original, layer.weight)
    np.testing.assert_array_equal(subject, model.subject_head.layers[0].weight)


def test_constant_shift_of_semantic_logits_keeps_argmax(dataset: Dataset, vocab: VocabularySet) -> None:
    featurizer = _featurizer(dataset, vocab)
    batch = featurizer.batch(dataset.images, sample_pairs(dataset.images, dataset.relationships, 1.0, seed=4))
    shifted = dataclasses.replace(batch, sem_logits=batch.sem_logits + 7.5)
    config = TrainConfig(epochs=3, seed=4)

    plain, moved = _model(vocab), _model(vocab)
    fit(plain, batch, config)
    fit(moved, shifted, config)

    np.testing.assert_array_equal(plain.predict_proba(batch).argmax(axis=1), moved.predict_proba(shifted).argmax(axis=1))
    np.testing.assert_allclose(plain.predict_proba(batch), moved.predict_proba(shifted), atol=1e-6)


def test_attribute_training(dataset: Dataset, vocab: VocabularySet) -> None:
    model = init_attribute_model(len(vocab.attributes), FEATURE_DIM, hidden=16, seed=0)
    _, trace = train_attributes(model, dataset, TrainConfig(epochs=5, neg_pos_ratio=1.0, seed=0))
    assert trace[-1] < trace[0]


def _head(model: AttributeModel) -> list:
    return [(layer.weight.copy(), layer.bias.copy()) for layer in model.head.layers]


def test_attribute_training_is_seeded(dataset: Dataset, vocab: VocabularySet) -> None:
    config = TrainConfig(epochs=2, neg_pos_ratio=1.0, seed=3)
    a, _ = train_attributes(init_attribute_model(len(vocab.attributes), FEATURE_DIM, hidden=16, seed=3), dataset, config)
    b, _ = train_attributes(init_attribute_model(len(vocab.attributes), FEATURE_DIM, hidden=16, seed=3), dataset, config)

    for (wa, ba), (wb, bb) in zip(_head(a), _head(b)):
        np.testing.assert_array_equal(wa, wb)
        np.testing.assert_array_equal(ba, bb)


def test_attribute_zero_learning_rate_leaves_parameters(dataset: Dataset, vocab: VocabularySet) -> None:
    model = init_attribute_model(len(vocab.attributes), FEATURE_DIM, hidden=16, seed=0)
    before = _head(model)
    train_attributes(model, dataset, TrainConfig(epochs=2, learning_rate=0.0, neg_pos_ratio=1.0, seed=0))

    for (w0, b0), (w1, b1) in zip(before, _head(model)):
        np.testing.assert_array_equal(w0, w1)
        np.testing.assert_array_equal(b0, b1)


def test_non_finite_loss_raises() -> None:
    model = init_attribute_model(3, 2, hidden=4, seed=0)
    batch = AttributeBatch(np.array([[np.nan, 1.0], [0.0, 1.0]]), np.array([1, 0]))
    with pytest.raises(TrainingDivergedError) as excinfo:
        fit(model, batch, TrainConfig(epochs=1, batch_size=8, seed=0))
    assert excinfo.value.epoch == 1
    assert excinfo.value.batch == 0


def test_empty_batch_is_rejected() -> None:
    model = init_attribute_model(3, 2, hidden=4, seed=0)
    batch = AttributeBatch(np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
    with pytest.raises(PipelineError):
        fit(model, batch, TrainConfig(epochs=1))


@pytest.mark.parametrize(
    "overrides",
    [{"epochs": 0}, {"momentum": 1.0}, {"learning_rate": -0.1}, {"batch_size": 0}, {"seed": -1}, {"iou_match": 0.0}],
)
def test_train_config_validation(overrides: dict) -> None:
    with pytest.raises(ValidationError):
        TrainConfig(**overrides)


def test_train_config_defaults_come_from_settings() -> None:
    config = TrainConfig()
    assert config.epochs == 8
    assert config.learning_rate == 0.01
    assert config.momentum == 0.9
    assert config.batch_size == 64
