"""Model-agnostic importance estimators under two aggregation strategies.

``ensemble`` scores the averaged-prediction model; ``sub_models`` averages
the score vectors of its members.
"""
from ._common import METHODS, STRATEGIES, ImportanceScores, aggregate_submodel_scores
from .cfi import ConditionalSampler, cfi, cfi_all, conditional_sampler_fit, fit_samplers
from .loco import loco, loco_all, loco_from_restricted, refit_restricted
from .sage import ImputationGame, default_background, sage, sage_all, sage_value

__all__ = [
    "METHODS", "STRATEGIES", "ImportanceScores", "aggregate_submodel_scores",
    "loco", "loco_all", "loco_from_restricted", "refit_restricted",
    "ConditionalSampler", "conditional_sampler_fit", "fit_samplers", "cfi", "cfi_all",
    "ImputationGame", "default_background", "sage", "sage_all", "sage_value",
]
