"""Evaluation package - matching, recall, AP and the weighted score"""
from .evaluator import (
    EvalReport,
    MatchCriterion,
    MatchMode,
    average_precision,
    evaluate,
    format_report,
    match_attribute_predictions,
    match_predictions,
    recall_at_k,
    weighted_score,
)

__all__ = [
    "EvalReport",
    "MatchCriterion",
    "MatchMode",
    "average_precision",
    "evaluate",
    "format_report",
    "match_attribute_predictions",
    "match_predictions",
    "recall_at_k",
    "weighted_score",
]
