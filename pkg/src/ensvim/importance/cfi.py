"""Conditional feature importance.

Feature ``j`` of the test inputs is redrawn from an estimate of
``P(X_j | X_-j)`` and the same model is scored on the perturbed inputs; no
refitting takes place. The conditional draw is the regression estimate of
``X_j`` from the other columns plus a permuted calibration residual.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._seeding import derive_seed, make_rng
from ..ensembles import EnsembleModel, combine_predictions, fit_bagging
from ..exceptions import DegenerateSamplerError, DomainError, ShapeError
from ..learners import FitJob, TreeConfig
from ._common import (
    ImportanceScores,
    aggregate_submodel_scores,
    check_strategies,
    member_predictions,
    members_of,
    squared_errors,
    standard_error,
)

MIN_CALIBRATION_ROWS = 20
SAMPLER_B = 10
SAMPLER_MIN_LEAF = 40
DEFAULT_N_PERM = 10


def default_sampler_regressor():
    return TreeConfig(min_samples_leaf=SAMPLER_MIN_LEAF)


@dataclass
class ConditionalSampler:
    feature: int
    regressor: object
    residuals: np.ndarray

    def conditional_mean(self, X):
        return self.regressor.predict(X)

    def sample(self, X, rng):
        """Copy of ``X`` with column ``feature`` redrawn conditionally on the rest."""
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        m = len(self.residuals)
        if n <= m:
            res = self.residuals[rng.permutation(m)[:n]]
        else:
            res = self.residuals[rng.integers(0, m, size=n)]
        out = X.copy()
        out[:, self.feature] = self.conditional_mean(X) + res
        return out


def _out_of_bag_predictions(ens: EnsembleModel, X):
    n = X.shape[0]
    preds = ens.predict_members(X)
    total = np.zeros(n)
    count = np.zeros(n)
    for b, rows in enumerate(ens.bootstrap_indices):
        oob = np.ones(n, dtype=bool)
        oob[rows] = False
        total[oob] += preds[b, oob]
        count[oob] += 1
    fallback = combine_predictions(preds)
    return np.where(count > 0, total / np.maximum(count, 1), fallback)


def conditional_sampler_fit(X_calib, j, regressor=None, seed=0) -> ConditionalSampler:
    """Fit a residual-permutation sampler for column ``j``.

    ``regressor`` is a learner config; the default is a bagged tree, whose
    residuals are taken out-of-bag so they are not shrunk by overfitting.
    A ``LinearConfig`` gives in-sample least-squares residuals.
    """
    X_calib = np.asarray(X_calib, dtype=float)
    n, d = X_calib.shape
    if n < MIN_CALIBRATION_ROWS:
        raise ShapeError(f"need at least {MIN_CALIBRATION_ROWS} calibration rows")
    target = X_calib[:, j]
    if np.ptp(target) == 0.0:
        raise DegenerateSamplerError(f"column {j} is constant")
    regressor = default_sampler_regressor() if regressor is None else regressor
    cols = tuple(c for c in range(d) if c != j)
    if isinstance(regressor, TreeConfig):
        ens = fit_bagging(_ColumnRestricted(regressor, cols), SAMPLER_B, X_calib, target, seed)
        residuals = target - _out_of_bag_predictions(ens, X_calib)
        model = ens
    else:
        model = regressor.fit(X_calib, target, seed, columns=cols)
        residuals = target - model.predict(X_calib)
    return ConditionalSampler(j, model, residuals)


class _ColumnRestricted:
    """Learner config wrapper that pins the column subset of every fit job."""

    def __init__(self, config, columns):
        self.config = config
        self.columns = columns

    def fit_many(self, X, y, jobs):
        return self.config.fit_many(X, y, [FitJob(j.seed, j.rows, self.columns) for j in jobs])


def fit_samplers(X_calib, regressor=None, seed=0):
    """One conditional sampler per column."""
    return [
        conditional_sampler_fit(X_calib, j, regressor, seed=derive_seed("sampler", seed, j))
        for j in range(np.asarray(X_calib).shape[1])
    ]


def cfi_all(model, test, samplers, n_perm=DEFAULT_N_PERM, seed=0, strategies=("ensemble", "sub_models")):
    strategies = check_strategies(strategies)
    if n_perm < 1:
        raise DomainError("n_perm must be >= 1")
    members = members_of(model)
    X, y = np.asarray(test.X, dtype=float), np.asarray(test.y, dtype=float)
    base = member_predictions(members, X)
    base_loss_ens = squared_errors(y, combine_predictions(base))
    base_loss = squared_errors(y, base)

    d = X.shape[1]
    ens_diff = np.zeros((d, len(y)))
    sub_diff = np.zeros((d, len(members), len(y)))
    for j, sampler in enumerate(samplers):
        if sampler.feature != j:
            raise ShapeError("samplers must be ordered by feature index")
        for k in range(n_perm):
            Xp = sampler.sample(X, make_rng("cfi", seed, j, k))
            preds = member_predictions(members, Xp)
            ens_diff[j] += squared_errors(y, combine_predictions(preds)) - base_loss_ens
            sub_diff[j] += squared_errors(y, preds) - base_loss
    ens_diff /= n_perm
    sub_diff /= n_perm

    result = {}
    diag = {"n_perm": n_perm}
    if "ensemble" in strategies:
        result["ensemble"] = ImportanceScores(
            ens_diff.mean(axis=1), "cfi", "ensemble", len(y),
            standard_error(ens_diff, axis=1), dict(diag))
    if "sub_models" in strategies:
        per_member = sub_diff.mean(axis=2).T
        result["sub_models"] = ImportanceScores(
            aggregate_submodel_scores(per_member), "cfi", "sub_models", len(y),
            standard_error(sub_diff.mean(axis=1), axis=1),
            dict(diag, member_scores=per_member))
    return result


def cfi(model, test, samplers, n_perm=DEFAULT_N_PERM, strategy="ensemble", seed=0) -> ImportanceScores:
    """Average risk increase under ``n_perm`` conditional redraws of each feature."""
    return cfi_all(model, test, samplers, n_perm, seed, (strategy,))[strategy]
