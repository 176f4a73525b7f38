"""Services package"""
from .checkpoint_store import CheckpointFormatError, load_checkpoint, save_checkpoint
from .dataset_io import Dataset, DatasetFormatError, VocabularySet, load_dataset, read_vocabularies
from .feature_store import FeatureFormatError, FeatureStore, read_features, write_features
from .manifest import write_manifest
from .synthetic_world import SyntheticDataset, default_vocabularies, synth_world

__all__ = [
    "CheckpointFormatError",
    "Dataset",
    "DatasetFormatError",
    "FeatureFormatError",
    "FeatureStore",
    "SyntheticDataset",
    "VocabularySet",
    "default_vocabularies",
    "load_checkpoint",
    "load_dataset",
    "read_features",
    "read_vocabularies",
    "save_checkpoint",
    "synth_world",
    "write_features",
    "write_manifest",
]
