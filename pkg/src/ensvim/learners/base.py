"""Shared predictor contract.

Every trained model sees the full ``d``-column design matrix and records
which ``columns`` it actually uses, so a model refit without feature ``j``
is called exactly like the full model.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError, EnsvimError, ShapeError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class FitJob:
    """One model to train: a row subset, a column subset and a seed.

    ``rows=None`` means all rows, ``columns=None`` all columns.
    """

    seed: int
    rows: np.ndarray | None = None
    columns: tuple | None = None


def resolve_columns(columns, d):
    if columns is None:
        return tuple(range(d))
    cols = tuple(int(c) for c in columns)
    if any(c < 0 or c >= d for c in cols) or len(set(cols)) != len(cols):
        raise ShapeError(f"invalid column subset {cols} for d={d}")
    return cols


class Predictor:
    feature_count: int

    def predict(self, X):
        raise NotImplementedError

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ShapeError(
                f"expected a matrix with {self.feature_count} columns, got shape {X.shape}"
            )
        return X


class LearnerConfig:
    """Base for learner configurations: ``fit`` one model, ``fit_many`` a batch."""

    kind = "base"

    def fit(self, X, y, seed, rows=None, columns=None):
        return self.fit_many(X, y, [FitJob(seed, rows, columns)])[0]

    def fit_many(self, X, y, jobs):
        models = []
        for i, job in enumerate(jobs):
            try:
                models.append(self._fit_one(X, y, job))
            except EnsvimError as exc:
                if getattr(exc, "model_index", None) is None:
                    exc.model_index = i
                raise
        return models

    def _fit_one(self, X, y, job):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def key(self):
        """Stable short hash of the configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def predict(model, X):
    """Evaluate any predictor on ``X``."""
    return model.predict(X)


def _checksum(state):
    blob = json.dumps(state, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def dump_model(model) -> str:
    """Serialize a trained model to a self-describing JSON string."""
    state = model.state_dict()
    return json.dumps({
        "format_version": FORMAT_VERSION,
        "type": model.kind,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "checksum": _checksum(state),
        "state": state,
    })


def load_model(blob: str):
    from . import linear, mlp, tree

    doc = json.loads(blob)
    if doc.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(f"unsupported model format {doc.get('format_version')}")
    if _checksum(doc["state"]) != doc["checksum"]:
        raise ConfigurationError("model checksum mismatch")
    classes = {
        "mlp": mlp.MLPRegressor,
        "tree": tree.RegressionTree,
        "linear": linear.LinearRegressor,
    }
    try:
        cls = classes[doc["type"]]
    except KeyError:
        raise ConfigurationError(f"unknown model type {doc['type']!r}") from None
    return cls.from_state(doc["config"], doc["seed"], doc["state"])
