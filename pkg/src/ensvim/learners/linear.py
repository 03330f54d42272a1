"""Ordinary least squares with intercept; a deterministic linear learner."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ShapeError
from .base import LearnerConfig, Predictor, resolve_columns


@dataclass(frozen=True)
class LinearConfig(LearnerConfig):
    kind = "linear"

    def to_dict(self):
        return {"type": self.kind}

    def _fit_one(self, X, y, job):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ShapeError("X must be (n, d) and y (n,)")
        cols = resolve_columns(job.columns, X.shape[1])
        rows = slice(None) if job.rows is None else np.asarray(job.rows, dtype=np.intp)
        Xs = X[rows][:, list(cols)]
        design = np.column_stack([np.ones(Xs.shape[0]), Xs])
        coef, *_ = np.linalg.lstsq(design, y[rows], rcond=None)
        weights = np.zeros(X.shape[1])
        weights[list(cols)] = coef[1:]
        return LinearRegressor(self, int(job.seed), cols, X.shape[1], float(coef[0]), weights)


class LinearRegressor(Predictor):
    kind = "linear"

    def __init__(self, config, seed, columns, feature_count, intercept, weights):
        self.config = config
        self.seed = seed
        self.columns = tuple(columns)
        self.feature_count = feature_count
        self.intercept = intercept
        self.weights = np.asarray(weights, dtype=float)

    def predict(self, X):
        return self._check(X) @ self.weights + self.intercept

    def state_dict(self):
        return {"columns": list(self.columns), "feature_count": self.feature_count,
                "intercept": self.intercept, "weights": self.weights.tolist()}

    @classmethod
    def from_state(cls, config, seed, state):
        return cls(LinearConfig(), seed, state["columns"], state["feature_count"],
                   state["intercept"], state["weights"])
