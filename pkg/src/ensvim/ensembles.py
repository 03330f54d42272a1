"""Bagging and voting ensembles with mean-prediction combination."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._seeding import derive_seed, make_rng
from .exceptions import ConfigurationError, ShapeError, UndefinedMetricError
from .learners.base import FitJob, Predictor

DEFAULT_B = 10
KINDS = ("bagging", "voting")


@dataclass
class EnsembleModel(Predictor):
    members: list
    kind: str
    base_config: object
    member_seeds: list
    master_seed: int = 0
    bootstrap_indices: list | None = None

    def __post_init__(self):
        if not self.members:
            raise ConfigurationError("an ensemble needs at least one member")
        self.feature_count = self.members[0].feature_count

    @property
    def B(self):
        return len(self.members)

    def member_jobs(self, columns=None):
        """Fit jobs reproducing every member, optionally on a column subset."""
        rows = self.bootstrap_indices or [None] * self.B
        return [FitJob(s, r, columns) for s, r in zip(self.member_seeds, rows)]

    def predict_members(self, X):
        X = self._check(X)
        return np.stack([m.predict(X) for m in self.members])

    def predict(self, X):
        return ensemble_predict(self, X)


def _member_seeds(master_seed, B):
    return [derive_seed("member", int(master_seed), b) for b in range(B)]


def bootstrap_rows(master_seed, b, n):
    return make_rng("bootstrap", int(master_seed), b).integers(0, n, size=n)


def fit_bagging(base_config, B, X, y, master_seed) -> EnsembleModel:
    """Members trained on bootstrap resamples of size n, each with its own learner seed."""
    if B < 1:
        raise ConfigurationError("B must be >= 1")
    n = np.asarray(X).shape[0]
    seeds = _member_seeds(master_seed, B)
    boots = [bootstrap_rows(master_seed, b, n) for b in range(B)]
    members = _fit_members(base_config, X, y, [FitJob(s, r) for s, r in zip(seeds, boots)])
    return EnsembleModel(members, "bagging", base_config, seeds, int(master_seed), boots)


def fit_voting(base_config, B, X, y, master_seed) -> EnsembleModel:
    """Members trained on the full data and differing only in their seeds."""
    if B < 1:
        raise ConfigurationError("B must be >= 1")
    seeds = _member_seeds(master_seed, B)
    members = _fit_members(base_config, X, y, [FitJob(s) for s in seeds])
    return EnsembleModel(members, "voting", base_config, seeds, int(master_seed), None)


def fit_ensemble(kind, base_config, B, X, y, master_seed) -> EnsembleModel:
    if kind == "bagging":
        return fit_bagging(base_config, B, X, y, master_seed)
    if kind == "voting":
        return fit_voting(base_config, B, X, y, master_seed)
    raise ConfigurationError(f"unknown ensembling {kind!r}; expected one of {KINDS}")


def _fit_members(config, X, y, jobs):
    # learner errors carry the job index, which is the member index here
    return config.fit_many(X, y, jobs)


def combine_predictions(member_preds):
    """Mean over the leading (member) axis.

    Values are sorted along that axis before summation so the result is
    bit-identical under any reordering of the members.
    """
    member_preds = np.asarray(member_preds, dtype=float)
    return np.sort(member_preds, axis=0).sum(axis=0) / member_preds.shape[0]


def ensemble_predict(ens: EnsembleModel, X):
    return combine_predictions(ens.predict_members(X))


def pairwise_correlation(ens: EnsembleModel, X) -> float:
    """Mean Pearson correlation between member prediction vectors on ``X``."""
    if ens.B < 2:
        raise ConfigurationError("need at least two members")
    X = ens._check(X)
    if X.shape[0] < 2:
        raise ShapeError("need at least two rows")
    return mean_pairwise_correlation(ens.predict_members(X))


def mean_pairwise_correlation(preds) -> float:
    """Mean over unordered row pairs of the Pearson correlation of a ``(B, m)`` array."""
    preds = np.asarray(preds, dtype=float)
    sd = preds.std(axis=1)
    if np.any(sd == 0.0):
        raise UndefinedMetricError("a member has constant predictions; correlation undefined")
    z = (preds - preds.mean(axis=1, keepdims=True)) / sd[:, None]
    corr = z @ z.T / preds.shape[1]
    pairs = list(itertools.combinations(range(preds.shape[0]), 2))
    return float(np.clip(np.mean([corr[a, b] for a, b in pairs]), -1.0, 1.0))


def correlation_scaled_variance(member_preds):
    """Empirical check of the variance-reduction relation for averaged predictors.

    ``member_preds`` is ``(R, B)``: the B members' predictions at one fixed
    input over R independent training-data draws. Returns the observed
    ``Var(ensemble) / Var(member)``, the mean pairwise correlation of the
    members across draws, and the relation's prediction ``rho + (1 - rho) / B``.
    """
    member_preds = np.asarray(member_preds, dtype=float)
    R, B = member_preds.shape
    if R < 2 or B < 1:
        raise ShapeError("need at least two replicates")
    var_member = float(np.mean(member_preds.var(axis=0, ddof=1)))
    var_ens = float(member_preds.mean(axis=1).var(ddof=1))
    rho = 1.0 if B == 1 else mean_pairwise_correlation(member_preds.T)
    return var_ens / var_member, rho, rho + (1.0 - rho) / B
