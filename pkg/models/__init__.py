"""Models package - numpy classifiers, sampling and training"""
from .attribute_model import AttributeBatch, AttributeModel, attribute_scores, init_attribute_model
from .base_model import BaseClassifier
from .fusion_model import FusionModel, forward, init_model, loss_and_grads, predict_predicate
from .mlp import DenseLayer, DimensionMismatchError, MlpParams, softmax
from .sampling import AttributeSample, sample_attributes, sample_pairs
from .trainer import TrainConfig, TrainingDivergedError, fit, train, train_attributes

__all__ = [
    "AttributeBatch",
    "AttributeModel",
    "attribute_scores",
    "init_attribute_model",
    "BaseClassifier",
    "FusionModel",
    "forward",
    "init_model",
    "loss_and_grads",
    "predict_predicate",
    "DenseLayer",
    "DimensionMismatchError",
    "MlpParams",
    "softmax",
    "AttributeSample",
    "sample_attributes",
    "sample_pairs",
    "TrainConfig",
    "TrainingDivergedError",
    "fit",
    "train",
    "train_attributes",
]
