from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ensembles import EnsembleModel, combine_predictions
from ..exceptions import ConfigurationError, ShapeError

METHODS = ("loco", "cfi", "sage")
STRATEGIES = ("ensemble", "sub_models")


@dataclass
class ImportanceScores:
    scores: np.ndarray
    method: str
    strategy: str
    n_test: int
    se: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        self.scores = np.asarray(self.scores, dtype=float)
        self.se = np.asarray(self.se, dtype=float)

    def to_rows(self):
        """Records ``method, strategy, feature, score, se``."""
        return [
            {"method": self.method, "strategy": self.strategy, "feature": j,
             "score": float(s), "se": float(e)}
            for j, (s, e) in enumerate(zip(self.scores, self.se))
        ]


def aggregate_submodel_scores(per_member):
    """Elementwise mean of member score vectors, independent of member order."""
    if len(per_member) == 0:
        raise ShapeError("need at least one score vector")
    lengths = {len(v) for v in per_member}
    if len(lengths) != 1:
        raise ShapeError("score vectors have different lengths")
    return combine_predictions(np.asarray(per_member, dtype=float))


def check_strategies(strategies):
    strategies = (strategies,) if isinstance(strategies, str) else tuple(strategies)
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {s!r}; expected one of {STRATEGIES}")
    return strategies


def members_of(model):
    """The constituent predictors of an ensemble, or the model itself."""
    if isinstance(model, EnsembleModel):
        return list(model.members)
    return [model]


def member_predictions(members, X):
    return np.stack([m.predict(X) for m in members])


def squared_errors(y, pred):
    return (y - pred) ** 2


def standard_error(samples, axis=0):
    samples = np.asarray(samples, dtype=float)
    k = samples.shape[axis]
    if k < 2:
        return np.zeros(np.delete(samples.shape, axis))
    return samples.std(axis=axis, ddof=1) / np.sqrt(k)


def r2_score(y, pred):
    ss = np.sum((y - y.mean()) ** 2)
    return float(1.0 - np.sum((y - pred) ** 2) / ss) if ss > 0 else float("nan")
