"""
Inference and evaluation commands
"""
import argparse
from pathlib import Path
from typing import Dict, List, Optional

from loguru import logger

from config import settings
from core.errors import PipelineError
from evaluation.evaluator import evaluate, format_report
from features.pair_featurizer import PairFeaturizer
from features.semantic_freq import load_freq_table
from models.attribute_model import AttributeModel
from models.fusion_model import FusionModel
from models.mlp import DimensionMismatchError
from ranking.prediction_io import read_predictions, write_predictions
from ranking.ranker import Prediction, infer_image
from services.dataset_io import DETECTIONS_FILE, FEATURES_FILE, PAIR_FEATURES_FILE, load_dataset, read_gt

from .base_command import BaseCommand, CommandResult
from .data_commands import positive_int, vocabulary_inputs


def apply_ablation(model: FusionModel, no_spatial: bool, no_solo_heads: bool) -> None:
    """Mask branches at inference; a checkpoint trained without a branch keeps it off."""
    if no_spatial and model.use_spatial:
        logger.warning("Checkpoint was trained with the spatial branch; masking it for --no-spatial")
        model.use_spatial = False
    if no_solo_heads and model.use_solo_heads:
        logger.warning("Checkpoint was trained with solo heads; masking them for --no-solo-heads")
        model.use_solo_heads = False


class InferCommand(BaseCommand):
    """Rank relationship and attribute predictions for every image"""

    def get_name(self) -> str:
        return "infer"

    def get_description(self) -> str:
        return "Score and rank triplets for a dataset of detections"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--data", type=Path, required=True, help="dataset directory with detections and features")
        parser.add_argument("--freq", type=Path, required=True, help="frequency table file")
        parser.add_argument("--rel-model", type=Path, default=None, help="relationship checkpoint")
        parser.add_argument("--attr-model", type=Path, default=None, help="attribute checkpoint")
        parser.add_argument("--out", type=Path, required=True, help="output prediction file")
        parser.add_argument("--baseline", action="store_true", help="use the frequency table alone as S_P")
        parser.add_argument("--no-spatial", action="store_true")
        parser.add_argument("--no-solo-heads", action="store_true")
        parser.add_argument("--cap", type=positive_int, default=None, help="predicates kept per pair")
        parser.add_argument("--top-k", type=positive_int, default=settings.top_k)

    def run(self, args: argparse.Namespace) -> CommandResult:
        if not args.baseline and args.rel_model is None:
            raise PipelineError("--rel-model is required unless --baseline is given")
        vocab = self.load_vocabularies(args, args.data)
        dataset = load_dataset(args.data, vocab, with_gt=False)

        freq = load_freq_table(args.freq, vocab)
        rel_model: Optional[FusionModel] = None
        if args.baseline:
            if args.rel_model is not None:
                logger.warning("--baseline ranks with the frequency table; ignoring --rel-model")
        else:
            freq = freq.with_alpha(settings.freq_alpha_fusion)
            rel_model = FusionModel.load(args.rel_model)
            if rel_model.feature_dim != dataset.features.dim:
                raise DimensionMismatchError(
                    "visual", f"model expects feature dim {rel_model.feature_dim}, dataset has {dataset.features.dim}"
                )
            apply_ablation(rel_model, args.no_spatial, args.no_solo_heads)

        attr_model: Optional[AttributeModel] = None
        if args.attr_model is not None:
            attr_model = AttributeModel.load(args.attr_model)
            if attr_model.feature_dim != dataset.features.dim:
                raise DimensionMismatchError(
                    "head", f"model expects feature dim {attr_model.feature_dim}, dataset has {dataset.features.dim}"
                )

        featurizer = PairFeaturizer(dataset.features, dataset.pair_index, freq)
        predictions: Dict[str, List[Prediction]] = {}
        for image_id in sorted(dataset.images):
            predictions[image_id] = infer_image(
                dataset.images[image_id],
                featurizer,
                rel_model=rel_model,
                attr_model=attr_model,
                per_pair_predicate_cap=args.cap,
                top_k=args.top_k,
                baseline=args.baseline,
            )

        write_predictions(args.out, predictions, vocab)
        inputs = [args.data / name for name in (DETECTIONS_FILE, FEATURES_FILE, PAIR_FEATURES_FILE)]
        inputs += [p for p in (args.freq, args.rel_model, args.attr_model) if p is not None]
        self.record(args, args.out, [*inputs, *vocabulary_inputs(args)])
        return self.format_success(
            args.out,
            images=len(predictions),
            predictions=sum(len(v) for v in predictions.values()),
        )


class EvalCommand(BaseCommand):
    """Score a prediction file against ground truth"""

    def get_name(self) -> str:
        return "eval"

    def get_description(self) -> str:
        return "Compute R@K, mAP_rel, mAP_phr and the weighted score"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--predictions", type=Path, required=True)
        parser.add_argument("--gt", type=Path, required=True, help="ground-truth file")
        parser.add_argument("--out", type=Path, required=True, help="output report (JSON)")
        parser.add_argument("--macro-recall", action="store_true", help="average recall per image")
        parser.add_argument("--recall-k", type=positive_int, default=settings.recall_k)
        parser.add_argument("--iou-threshold", type=float, default=settings.iou_threshold)

    def run(self, args: argparse.Namespace) -> CommandResult:
        if not 0.0 < args.iou_threshold <= 1.0:
            raise PipelineError(f"--iou-threshold must lie in (0, 1], got {args.iou_threshold}")
        vocab = self.load_vocabularies(args, args.gt.parent)
        predictions = read_predictions(args.predictions, vocab)
        relationships, attributes = read_gt(args.gt, vocab)

        report = evaluate(
            predictions,
            relationships,
            attributes,
            vocab,
            recall_k=args.recall_k,
            iou_threshold=args.iou_threshold,
            macro_recall=args.macro_recall,
        )
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        print(format_report(report))
        self.record(args, args.out, [args.predictions, args.gt, *vocabulary_inputs(args)])
        return self.format_success(args.out, final_score=report.final_score, report=report)
