"""
Training commands for the relationship and attribute models
"""
import argparse
from pathlib import Path
from typing import Any, Dict

from config import settings
from features.pair_featurizer import PairFeaturizer
from features.semantic_freq import load_freq_table
from models.attribute_model import init_attribute_model
from models.fusion_model import init_model
from models.trainer import TrainConfig, train, train_attributes
from services.dataset_io import (
    DETECTIONS_FILE,
    FEATURES_FILE,
    GT_FILE,
    PAIR_FEATURES_FILE,
    load_dataset,
)

from .base_command import BaseCommand, CommandResult
from .data_commands import positive_int, vocabulary_inputs


def add_train_arguments(parser: argparse.ArgumentParser, default_ratio: float) -> None:
    parser.add_argument("--data", type=Path, required=True, help="training dataset directory")
    parser.add_argument("--out", type=Path, required=True, help="output checkpoint file")
    parser.add_argument("--epochs", type=positive_int, default=None)
    parser.add_argument("--lr", type=float, default=None, help="learning rate")
    parser.add_argument("--momentum", type=float, default=None)
    parser.add_argument("--batch-size", type=positive_int, default=None)
    parser.add_argument("--neg-pos-ratio", type=float, default=default_ratio)


def train_config(args: argparse.Namespace) -> TrainConfig:
    overrides: Dict[str, Any] = {
        "epochs": args.epochs,
        "learning_rate": args.lr,
        "momentum": args.momentum,
        "batch_size": args.batch_size,
    }
    return TrainConfig(
        neg_pos_ratio=args.neg_pos_ratio,
        seed=args.seed,
        **{key: value for key, value in overrides.items() if value is not None},
    )


def dataset_inputs(data: Path) -> list:
    return [data / name for name in (DETECTIONS_FILE, FEATURES_FILE, PAIR_FEATURES_FILE, GT_FILE)]


class TrainRelCommand(BaseCommand):
    """Train the fusion relationship model"""

    def get_name(self) -> str:
        return "train-rel"

    def get_description(self) -> str:
        return "Train the relationship model (semantic prior + spatial + visual branches)"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        add_train_arguments(parser, settings.rel_neg_pos_ratio)
        parser.add_argument("--freq", type=Path, required=True, help="frequency table file")
        parser.add_argument("--no-spatial", action="store_true", help="drop the spatial branch")
        parser.add_argument("--no-solo-heads", action="store_true", help="drop the subject/object heads")

    def run(self, args: argparse.Namespace) -> CommandResult:
        config = train_config(args)
        vocab = self.load_vocabularies(args, args.data)
        dataset = load_dataset(args.data, vocab)
        freq = load_freq_table(args.freq, vocab).with_alpha(settings.freq_alpha_fusion)
        featurizer = PairFeaturizer(dataset.features, dataset.pair_index, freq)

        model = init_model(
            num_classes=len(vocab.predicates),
            feature_dim=dataset.features.dim,
            seed=args.seed,
            use_spatial=not args.no_spatial,
            use_solo_heads=not args.no_solo_heads,
        )
        model, losses = train(model, dataset, featurizer, config)
        model.save(args.out)
        self.record(args, args.out, [*dataset_inputs(args.data), args.freq, *vocabulary_inputs(args)])
        return self.format_success(args.out, losses=losses)


class TrainAttrCommand(BaseCommand):
    """Train the attribute model"""

    def get_name(self) -> str:
        return "train-attr"

    def get_description(self) -> str:
        return "Train the attribute model on object features"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        add_train_arguments(parser, settings.attr_neg_pos_ratio)

    def run(self, args: argparse.Namespace) -> CommandResult:
        config = train_config(args)
        vocab = self.load_vocabularies(args, args.data)
        dataset = load_dataset(args.data, vocab)

        model = init_attribute_model(len(vocab.attributes), dataset.features.dim, seed=args.seed)
        model, losses = train_attributes(model, dataset, config)
        model.save(args.out)
        self.record(args, args.out, [*dataset_inputs(args.data), *vocabulary_inputs(args)])
        return self.format_success(args.out, losses=losses)
