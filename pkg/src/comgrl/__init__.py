"""Comprehensive graph representation learning for node classification.

Couples a neighborhood-contrastive MLP encoder with a linear-cost global
self-attention stack, trained in two stages: pre-training on the original
graph, then fine-tuning with pseudo-label-guided mixup of node attributes
and structure.
"""

from .estimator import ComGRLClassifier
from .graphs import Graph, contrast_coefficients, hop_neighborhoods, normalized_adjacency_power
from .datasets import SBMSpec, generate_sbm, inject_graph_noise, inject_label_noise, load_dataset, write_dataset
from .model import ComGRLModel
from .training import (
    DATASET_DEFAULTS,
    ExperimentReport,
    TrainConfig,
    TrainingDiverged,
    aggregate_reports,
    evaluate,
    fit_model,
    train,
    variant_config,
)

__version__ = "0.1.0"

__all__ = [
    "ComGRLClassifier",
    "ComGRLModel",
    "DATASET_DEFAULTS",
    "ExperimentReport",
    "Graph",
    "SBMSpec",
    "TrainConfig",
    "TrainingDiverged",
    "aggregate_reports",
    "contrast_coefficients",
    "evaluate",
    "fit_model",
    "generate_sbm",
    "hop_neighborhoods",
    "inject_graph_noise",
    "inject_label_noise",
    "load_dataset",
    "normalized_adjacency_power",
    "train",
    "variant_config",
    "write_dataset",
]
