"""Features package - semantic prior, spatial encoding and pair inputs"""
from .pair_featurizer import MissingFeatureError, PairBatch, PairFeaturizer, PairSample, TrainPair
from .semantic_freq import (
    FreqTable,
    baseline_predict,
    build_freq_table,
    load_freq_table,
    save_freq_table,
    semantic_logits,
)
from .spatial_encoder import SPATIAL_DIM, box_delta, normalized_coords, spatial_feature, spatial_features

__all__ = [
    "MissingFeatureError",
    "PairBatch",
    "PairFeaturizer",
    "PairSample",
    "TrainPair",
    "FreqTable",
    "baseline_predict",
    "build_freq_table",
    "load_freq_table",
    "save_freq_table",
    "semantic_logits",
    "SPATIAL_DIM",
    "box_delta",
    "normalized_coords",
    "spatial_feature",
    "spatial_features",
]
