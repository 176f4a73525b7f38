"""
Dataset commands: synthetic world generation and frequency-table build
"""
import argparse
from pathlib import Path

from loguru import logger

from config import settings
from features.semantic_freq import build_freq_table, save_freq_table
from services.dataset_io import GT_FILE, read_gt
from services.synthetic_world import synth_world

from .base_command import BaseCommand, CommandResult, non_negative_int


def at_least_two(value: str) -> int:
    number = int(value)
    if number < 2:
        raise argparse.ArgumentTypeError(f"needs at least 2 objects per image, got {number}")
    return number


def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {number}")
    return number


def vocabulary_inputs(args: argparse.Namespace) -> list:
    return [p for p in (args.vocab_objects, args.vocab_predicates, args.vocab_attributes) if p is not None]


class SynthCommand(BaseCommand):
    """Write a synthetic dataset in the standard directory layout"""

    def get_name(self) -> str:
        return "synth"

    def get_description(self) -> str:
        return "Generate a synthetic dataset (detections, features, ground truth, vocabularies)"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--out", type=Path, required=True, help="output dataset directory")
        parser.add_argument("--n-images", type=non_negative_int, default=settings.synth_images)
        parser.add_argument("--n-objects", type=at_least_two, default=settings.synth_objects_per_image)
        parser.add_argument("--feature-dim", type=positive_int, default=settings.feature_dim)

    def run(self, args: argparse.Namespace) -> CommandResult:
        vocab = self.load_vocabularies(args)
        dataset = synth_world(
            seed=args.seed,
            n_images=args.n_images,
            n_objects_per_image=args.n_objects,
            vocab=vocab,
            feature_dim=args.feature_dim,
        )
        dataset.write(args.out)
        self.record(args, args.out, vocabulary_inputs(args))
        return self.format_success(
            args.out,
            images=len(dataset.images),
            relationships=len(dataset.relationships),
            attributes=len(dataset.attributes),
        )


class BuildFreqCommand(BaseCommand):
    """Count p(P | S, O) from a dataset's ground truth"""

    def get_name(self) -> str:
        return "build-freq"

    def get_description(self) -> str:
        return "Build the predicate frequency table from ground-truth relationships"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--data", type=Path, required=True, help="dataset directory")
        parser.add_argument("--alpha", type=float, default=settings.freq_alpha_baseline, help="additive smoothing")
        parser.add_argument("--out", type=Path, required=True, help="output table file")

    def run(self, args: argparse.Namespace) -> CommandResult:
        vocab = self.load_vocabularies(args, args.data)
        gt_path = args.data / GT_FILE
        relationships, _ = read_gt(gt_path, vocab)
        table = build_freq_table(relationships, vocab, args.alpha)
        save_freq_table(args.out, table)
        self.record(args, args.out, [gt_path, *vocabulary_inputs(args)])
        logger.info(f"build-freq: {len(table)} label pairs from {len(relationships)} triples")
        return self.format_success(args.out, keys=len(table), triples=len(relationships))
