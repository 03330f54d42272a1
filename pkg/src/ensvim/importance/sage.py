"""SAGE: Shapley values of a marginal-imputation value function.

For a feature subset ``S`` the restricted prediction at a test row averages
the model over ``n_cal`` background rows whose ``S``-complement columns
replace the test row's. The background row assignment is drawn once per
game, which makes ``v`` a fixed set function: the permutation-sampling
estimator and exact subset enumeration then target the same Shapley values.
"""
from __future__ import annotations

import numpy as np

from .._seeding import make_rng
from ..ensembles import combine_predictions
from ..exceptions import DomainError, ShapeError
from ._common import (
    ImportanceScores,
    aggregate_submodel_scores,
    check_strategies,
    member_predictions,
    members_of,
    standard_error,
)

BACKGROUND_ROWS = 128
DEFAULT_N_CAL = 32
DEFAULT_N_PERMS = 256


class ImputationGame:
    """Value function ``v(S)`` for the ensemble and for each member at once.

    ``value(S)`` returns a length ``B + 1`` array: the ensemble's value
    followed by the members'. ``v(empty) = 0`` because the empty coalition
    predicts the constant mean prediction over the background set.
    """

    def __init__(self, model, X_test, y_test, background, n_cal=DEFAULT_N_CAL, seed=0):
        self.members = members_of(model)
        self.X = np.asarray(X_test, dtype=float)
        self.y = np.asarray(y_test, dtype=float)
        self.background = np.asarray(background, dtype=float)
        if self.background.shape[0] < n_cal:
            raise ShapeError("background must have at least n_cal rows")
        if self.background.shape[1] != self.X.shape[1]:
            raise ShapeError("background and test column counts differ")
        self.d = self.X.shape[1]
        self.n_cal = n_cal
        rng = make_rng("sage-imputation", seed)
        self._draws = rng.integers(0, self.background.shape[0], size=(self.X.shape[0], n_cal))
        bg = member_predictions(self.members, self.background)
        mean_pred = np.concatenate([[combine_predictions(bg).mean()], bg.mean(axis=1)])
        self._base_risk = np.mean((self.y[None, :] - mean_pred[:, None]) ** 2, axis=1)
        self._cache = {frozenset(): np.zeros(len(self.members) + 1)}
        self.evaluations = 0

    def _restricted_predictions(self, S):
        n = self.X.shape[0]
        if len(S) == self.d:
            member = member_predictions(self.members, self.X)
        else:
            imputed = self.background[self._draws.reshape(-1)]
            cols = sorted(S)
            imputed[:, cols] = np.repeat(self.X[:, cols], self.n_cal, axis=0)
            member = member_predictions(self.members, imputed)
            member = member.reshape(len(self.members), n, self.n_cal).mean(axis=2)
        return np.concatenate([combine_predictions(member)[None, :], member])

    def value(self, S):
        key = frozenset(int(j) for j in S)
        hit = self._cache.get(key)
        if hit is None:
            pred = self._restricted_predictions(key)
            risk = np.mean((self.y[None, :] - pred) ** 2, axis=1)
            hit = self._base_risk - risk
            self._cache[key] = hit
            self.evaluations += 1
        return hit


def default_background(X_train, seed=0, size=BACKGROUND_ROWS):
    X_train = np.asarray(X_train, dtype=float)
    rng = make_rng("sage-background", seed)
    size = min(size, X_train.shape[0])
    return X_train[np.sort(rng.choice(X_train.shape[0], size=size, replace=False))]


def sage_value(model, S, test, background, n_cal=DEFAULT_N_CAL, seed=0):
    """Explained risk of ``model`` restricted to feature subset ``S``."""
    return float(ImputationGame(model, test.X, test.y, background, n_cal, seed).value(S)[0])


def _finish(gains, strategies, game, n_perms):
    # gains: (n_perms, B + 1, d)
    result = {}
    diag = {"n_perm": n_perms, "n_cal": game.n_cal, "value_evaluations": game.evaluations}
    if "ensemble" in strategies:
        g = gains[:, 0, :]
        se = standard_error(g)
        result["ensemble"] = ImportanceScores(
            g.mean(axis=0), "sage", "ensemble", len(game.y), se, dict(diag, convergence_se=se))
    if "sub_models" in strategies:
        per_member = gains[:, 1:, :].mean(axis=0)
        se = standard_error(gains[:, 1:, :].mean(axis=1))
        result["sub_models"] = ImportanceScores(
            aggregate_submodel_scores(per_member), "sage", "sub_models", len(game.y), se,
            dict(diag, convergence_se=se, member_scores=per_member))
    return result


def sage_all(model, test, background, n_outer_perms=DEFAULT_N_PERMS, n_cal=DEFAULT_N_CAL,
             seed=0, strategies=("ensemble", "sub_models"), game=None):
    """Permutation-sampling SAGE under several strategies with shared orderings."""
    strategies = check_strategies(strategies)
    if n_outer_perms < 1:
        raise DomainError("n_outer_perms must be >= 1")
    if game is None:
        game = ImputationGame(model, test.X, test.y, background, n_cal, seed)
    d = game.d
    rng = make_rng("sage-orderings", seed)
    gains = np.zeros((n_outer_perms, len(game.members) + 1, d))
    for k in range(n_outer_perms):
        order = rng.permutation(d)
        prev = game.value(())
        coalition = []
        for j in order:
            coalition.append(int(j))
            cur = game.value(coalition)
            gains[k, :, j] = cur - prev
            prev = cur
    return _finish(gains, strategies, game, n_outer_perms)


def sage(model, test, background, n_outer_perms=DEFAULT_N_PERMS, n_cal=DEFAULT_N_CAL,
         strategy="ensemble", seed=0) -> ImportanceScores:
    """SAGE importance by averaging marginal gains along random feature orderings.

    ``diagnostics["convergence_se"]`` is the per-feature standard error across
    orderings.
    """
    return sage_all(model, test, background, n_outer_perms, n_cal, seed, (strategy,))[strategy]
