"""Explainable knowledge-graph recommendation with structure-aware attention."""

__version__ = "0.1.0"

from .estimator import KGAttentionRecommender
from .evaluate import MetricsReport, evaluate, lr_sweep
from .explain import ExplanationPath, extract_paths, render_explanation
from .graph import UnifiedGraph, build_unified_graph, neighbors, sample_neighbors
from .ingest import Dataset, IdMaps, RawInteraction, RawTriple
from .model import ModelConfig, ModelParams, forward, init_params
from .train import LossCurve, grad_check, train

__all__ = [
    "Dataset",
    "ExplanationPath",
    "IdMaps",
    "KGAttentionRecommender",
    "LossCurve",
    "MetricsReport",
    "ModelConfig",
    "ModelParams",
    "RawInteraction",
    "RawTriple",
    "UnifiedGraph",
    "build_unified_graph",
    "evaluate",
    "extract_paths",
    "forward",
    "grad_check",
    "init_params",
    "lr_sweep",
    "neighbors",
    "render_explanation",
    "sample_neighbors",
    "train",
]
