"""Base learners: MLP, randomized regression tree, least squares."""
from ..exceptions import ConfigurationError
from .base import FitJob, LearnerConfig, Predictor, dump_model, load_model, predict
from .linear import LinearConfig, LinearRegressor
from .mlp import MLPRegressor, MlpConfig, glorot_init, loss_and_gradients, mlp_fit
from .tree import RegressionTree, TreeConfig, tree_fit


def config_from_dict(spec) -> LearnerConfig:
    """Build a learner config from ``{"type": "mlp" | "tree" | "linear", ...}``."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    spec.pop("name", None)
    classes = {"mlp": MlpConfig, "tree": TreeConfig, "linear": LinearConfig}
    if kind not in classes:
        raise ConfigurationError(f"unknown learner type {kind!r}")
    try:
        return classes[kind](**spec)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


__all__ = [
    "FitJob", "LearnerConfig", "Predictor", "predict", "dump_model", "load_model",
    "MlpConfig", "MLPRegressor", "mlp_fit", "glorot_init", "loss_and_gradients",
    "TreeConfig", "RegressionTree", "tree_fit",
    "LinearConfig", "LinearRegressor", "config_from_dict",
]
