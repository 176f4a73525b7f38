"""Ranking package - proposals, triplet scores and top-k selection"""
from .prediction_io import read_predictions, write_predictions
from .ranker import (
    AttributePrediction,
    Prediction,
    TripletPrediction,
    infer_image,
    make_proposals,
    rank_top_k,
    score_attribute,
    score_triplet,
)

__all__ = [
    "read_predictions",
    "write_predictions",
    "AttributePrediction",
    "Prediction",
    "TripletPrediction",
    "infer_image",
    "make_proposals",
    "rank_top_k",
    "score_attribute",
    "score_triplet",
]
