"""Variable importance for ensembles of regression models.

Synthetic benchmarks, MLP/tree/linear learners, bagging and voting ensembles,
LOCO/CFI/SAGE importance under two aggregation strategies, ground-truth
oracles, evaluation metrics and a seeded experiment runner.
"""
from .bench import ExperimentConfig, ExperimentReport, emit, read_table, run_experiment, summarize
from .ensembles import EnsembleModel, fit_bagging, fit_ensemble, fit_voting, pairwise_correlation
from .evalmetrics import bias_variance, importance_mse, r2, relevance_labels, roc_auc
from .exceptions import EnsvimError
from .importance import ImportanceScores, cfi, loco, sage
from .learners import LinearConfig, MlpConfig, TreeConfig
from .oracle import (
    GroundTruth,
    asymptotic_importance,
    exact_sage_enumeration,
    montecarlo_total_sobol,
    true_loco_linear,
)
from .pipeline import run_pipeline
from .synthdata import Dataset, generate, train_test_split

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "ExperimentReport", "emit", "read_table", "run_experiment", "summarize",
    "EnsembleModel", "fit_bagging", "fit_ensemble", "fit_voting", "pairwise_correlation",
    "bias_variance", "importance_mse", "r2", "relevance_labels", "roc_auc",
    "EnsvimError", "ImportanceScores", "cfi", "loco", "sage",
    "LinearConfig", "MlpConfig", "TreeConfig",
    "GroundTruth", "asymptotic_importance", "exact_sage_enumeration", "montecarlo_total_sobol",
    "true_loco_linear", "run_pipeline", "Dataset", "generate", "train_test_split",
]
