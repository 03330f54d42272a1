"""Leave-one-covariate-out importance.

The importance of feature ``j`` is the increase in test MSE when the model
is refit without that column. Refits reuse every member's seed and
bootstrap rows, so only the missing column differs from the original fit.
"""
from __future__ import annotations

import numpy as np

from ..ensembles import EnsembleModel, combine_predictions
from ..exceptions import EnsvimError, RefitError
from ..learners.base import FitJob
from ._common import (
    ImportanceScores,
    aggregate_submodel_scores,
    check_strategies,
    member_predictions,
    members_of,
    r2_score,
    squared_errors,
    standard_error,
)


def refit_restricted(model, train, features=None):
    """Refit every member without each feature in turn.

    Returns ``{j: [member_0^{-j}, ..., member_{B-1}^{-j}]}``.
    """
    d = train.X.shape[1]
    features = range(d) if features is None else features
    if isinstance(model, EnsembleModel):
        config = model.base_config
        base_jobs = model.member_jobs()
    else:
        config = model.config
        base_jobs = [FitJob(model.seed)]
    B = len(base_jobs)
    jobs, keys = [], []
    for j in features:
        cols = tuple(c for c in range(d) if c != j)
        for b, job in enumerate(base_jobs):
            jobs.append(FitJob(job.seed, job.rows, cols))
            keys.append((j, b))
    try:
        fitted = config.fit_many(train.X, train.y, jobs)
    except EnsvimError as exc:
        idx = getattr(exc, "model_index", None)
        j, b = keys[idx] if idx is not None else (None, None)
        raise RefitError(j, b, exc) from exc
    restricted = {}
    for (j, b), m in zip(keys, fitted):
        restricted.setdefault(j, [None] * B)[b] = m
    return restricted


def loco_from_restricted(full_members, restricted, X_test, y_test, strategies=("ensemble", "sub_models")):
    """LOCO scores from already-trained full and restricted predictors.

    ``full_members`` is a list of B predictors and ``restricted[j]`` the B
    predictors trained without feature ``j``. With B = 1 and oracle
    predictors this computes the population LOCO target on ``X_test``.
    """
    strategies = check_strategies(strategies)
    y = np.asarray(y_test, dtype=float)
    features = sorted(restricted)
    full = member_predictions(full_members, X_test)
    ens_full = combine_predictions(full)
    loss_ens_full = squared_errors(y, ens_full)
    loss_full = squared_errors(y, full)

    out = {s: ([], [], []) for s in strategies}
    for j in features:
        part = member_predictions(restricted[j], X_test)
        if "ensemble" in strategies:
            ens_part = combine_predictions(part)
            diff = squared_errors(y, ens_part) - loss_ens_full
            scores, ses, r2s = out["ensemble"]
            scores.append(diff.mean())
            ses.append(standard_error(diff))
            r2s.append(r2_score(y, ens_part))
        if "sub_models" in strategies:
            diff = squared_errors(y, part) - loss_full
            scores, ses, r2s = out["sub_models"]
            scores.append(diff.mean(axis=1))
            ses.append(standard_error(diff.mean(axis=0)))
            r2s.append(float(np.mean([r2_score(y, p) for p in part])))

    result = {}
    for s, (scores, ses, r2s) in out.items():
        diagnostics = {"refit_r2": r2s, "features": features}
        if s == "sub_models":
            per_member = np.array(scores).T
            diagnostics["member_scores"] = per_member
            scores = aggregate_submodel_scores(per_member)
        result[s] = ImportanceScores(np.array(scores), "loco", s, len(y), np.array(ses), diagnostics)
    return result


def loco_all(model, train, test, strategies=("ensemble", "sub_models")):
    """LOCO under several strategies, sharing one set of refits."""
    restricted = refit_restricted(model, train)
    return loco_from_restricted(members_of(model), restricted, test.X, test.y, strategies)


def loco(model, train, test, strategy="ensemble") -> ImportanceScores:
    """LOCO importance of every feature.

    ``strategy="ensemble"`` scores the refit ensemble's risk difference;
    ``"sub_models"`` averages the member-level risk differences.
    """
    return loco_all(model, train, test, (strategy,))[strategy]
