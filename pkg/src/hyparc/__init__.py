"""Multiclass classification with maximum-margin hyperplane arrangements."""

__version__ = "0.1.0"

from .core import (Arrangement, Dataset, DegenerateModelError, DimensionError, Hyperparameters, Hyperplane,
                   TrainedModel, make_dataset, sign_pattern)
from .formulation import FixingPlan, build_model, estimate_big_m
from .solver import Binaries, Solution, SolveOptions, branch_and_bound, brute_force, eval_phi, local_search
from .reduction import cluster_hierarchical, math_heuristic, reduce_h, reduce_z
from .classify import build_rule, predict, predict_batch, accuracy, train
from .duality import extract_certificate, gram, verify_strong_duality
from .data import generate_clouds, grid_search_cv, kfold_split, load_csv, proportion_test, save_csv
from .estimator import ArrangementClassifier

__all__ = [
    "Arrangement", "ArrangementClassifier", "Binaries", "Dataset", "DegenerateModelError", "DimensionError",
    "FixingPlan", "Hyperparameters", "Hyperplane", "Solution", "SolveOptions", "TrainedModel", "accuracy",
    "branch_and_bound", "brute_force", "build_model", "build_rule", "cluster_hierarchical", "estimate_big_m",
    "eval_phi", "extract_certificate", "generate_clouds", "gram", "grid_search_cv", "kfold_split", "load_csv",
    "local_search", "make_dataset", "math_heuristic", "predict", "predict_batch", "proportion_test",
    "reduce_h", "reduce_z", "save_csv", "sign_pattern", "train", "verify_strong_duality",
]
