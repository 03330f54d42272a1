"""Randomized CART regression tree.

Growing is delegated to scikit-learn's ``DecisionTreeRegressor`` (squared
error, a random subset of candidate features at every node). The fitted
structure is copied into plain arrays, and prediction traverses those arrays
directly, so trees can be serialized and restored without scikit-learn.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from ..exceptions import ConfigurationError, ShapeError
from .base import LearnerConfig, Predictor, resolve_columns

LEAF = -1


@dataclass(frozen=True)
class TreeConfig(LearnerConfig):
    """``max_features_per_split=None`` means ``ceil(d / 3)`` of the columns in use."""

    max_depth: int | None = None
    max_features_per_split: int | None = None
    min_samples_leaf: int = 1

    kind = "tree"

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigurationError("max_depth must be positive or None")
        if self.max_features_per_split is not None and self.max_features_per_split < 1:
            raise ConfigurationError("max_features_per_split must be >= 1")
        if self.min_samples_leaf < 1:
            raise ConfigurationError("min_samples_leaf must be >= 1")

    def to_dict(self):
        out = asdict(self)
        out["type"] = self.kind
        return out

    def features_per_split(self, d):
        if self.max_features_per_split is None:
            return max(1, math.ceil(d / 3))
        if self.max_features_per_split > d:
            raise ConfigurationError(f"max_features_per_split={self.max_features_per_split} exceeds d={d}")
        return self.max_features_per_split

    def _fit_one(self, X, y, job):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ShapeError("X must be (n, d) and y (n,)")
        cols = resolve_columns(job.columns, X.shape[1])
        rows = slice(None) if job.rows is None else np.asarray(job.rows, dtype=np.intp)
        Xs = X[rows][:, list(cols)]
        est = DecisionTreeRegressor(
            criterion="squared_error",
            max_depth=self.max_depth,
            max_features=self.features_per_split(len(cols)),
            min_samples_leaf=self.min_samples_leaf,
            random_state=int(job.seed) % 2**32,
        )
        est.fit(Xs, y[rows])
        t = est.tree_
        col_map = np.asarray(cols, dtype=np.intp)
        feature = np.where(t.children_left == LEAF, LEAF, col_map[np.maximum(t.feature, 0)])
        return RegressionTree(
            self, int(job.seed), cols, X.shape[1],
            t.children_left.copy(), t.children_right.copy(), feature,
            t.threshold.copy(), t.value[:, 0, 0].copy(),
        )


def tree_fit(config: TreeConfig, X, y, seed, rows=None, columns=None):
    return config.fit(X, y, seed, rows=rows, columns=columns)


class RegressionTree(Predictor):
    """Array-backed binary tree; ``feature`` holds full-matrix column indices."""

    kind = "tree"

    def __init__(self, config, seed, columns, feature_count, left, right, feature, threshold, value):
        self.config = config
        self.seed = seed
        self.columns = tuple(columns)
        self.feature_count = feature_count
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=float)
        self.value = np.asarray(value, dtype=float)

    @property
    def n_leaves(self):
        return int(np.sum(self.left == LEAF))

    def apply(self, X):
        """Leaf index reached by every row."""
        X = self._check(X)
        # split thresholds were learned on float32 inputs
        X32 = X.astype(np.float32)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        internal = self.left[node] != LEAF
        while internal.any():
            r = rows[internal]
            nd = node[r]
            go_left = X32[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            internal[r] = self.left[node[r]] != LEAF
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    def state_dict(self):
        return {
            "columns": list(self.columns),
            "feature_count": self.feature_count,
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_state(cls, config, seed, state):
        cfg = dict(config)
        cfg.pop("type", None)
        return cls(TreeConfig(**cfg), seed, state["columns"], state["feature_count"],
                   state["left"], state["right"], state["feature"], state["threshold"], state["value"])
