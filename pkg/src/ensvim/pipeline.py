"""One experiment cell: split data, fit an ensemble, score every method."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_seed
from .ensembles import fit_ensemble
from .evalmetrics import r2
from .importance import cfi_all, default_background, fit_samplers, loco_all, sage_all
from .importance._common import check_strategies
from .exceptions import ConfigurationError
from .learners import config_from_dict
from .synthdata import train_test_split

DEFAULT_METHOD_PARAMS = {
    "cfi": {"n_perm": 10, "sampler": None},
    "sage": {"n_outer_perms": 256, "n_cal": 32, "background": 128, "max_test": None},
}


@dataclass
class CellResult:
    scores: dict
    r2: dict
    runtime_ms: dict = field(default_factory=dict)
    ensemble: object = None


def method_params(method, overrides=None):
    params = dict(DEFAULT_METHOD_PARAMS.get(method, {}))
    if overrides:
        unknown = set(overrides) - set(params)
        if unknown:
            raise ConfigurationError(f"unknown {method} parameters {sorted(unknown)}")
        params.update(overrides)
    return params


def run_pipeline(dataset, learner, ensembling, B, methods, strategies=("ensemble", "sub_models"),
                 seed=0, params=None, keep_model=False) -> CellResult:
    """Fit a ``B``-member ensemble on the training split and score ``methods``.

    ``scores`` maps ``(method, strategy)`` to ``ImportanceScores``; ``r2``
    holds the test R^2 of the ensemble and the mean member test R^2.
    """
    strategies = check_strategies(strategies)
    params = params or {}
    if isinstance(learner, dict):
        learner = config_from_dict(learner)
    train, test = train_test_split(dataset)

    t0 = time.perf_counter()
    ens = fit_ensemble(ensembling, learner, B, train.X, train.y, derive_seed("ensemble", seed))
    fit_ms = (time.perf_counter() - t0) * 1e3
    member_preds = ens.predict_members(test.X)
    r2s = {
        "ensemble": r2(test.y, ens.predict(test.X)),
        "sub_models": float(np.mean([r2(test.y, p) for p in member_preds])),
    }

    scores, runtime = {}, {}
    for method in methods:
        p = method_params(method, params.get(method))
        t0 = time.perf_counter()
        if method == "loco":
            out = loco_all(ens, train, test, strategies)
        elif method == "cfi":
            sampler = p["sampler"]
            if isinstance(sampler, dict):
                sampler = config_from_dict(sampler)
            samplers = fit_samplers(train.X, sampler, seed=derive_seed("samplers", seed))
            out = cfi_all(ens, test, samplers, p["n_perm"], derive_seed("cfi", seed), strategies)
        elif method == "sage":
            background = default_background(train.X, derive_seed("background", seed), p["background"])
            sage_test = test
            if p["max_test"] is not None and test.n > p["max_test"]:
                sage_test = test.subset(slice(0, p["max_test"]))
            out = sage_all(ens, sage_test, background, p["n_outer_perms"], p["n_cal"],
                           derive_seed("sage", seed), strategies)
        else:
            raise ConfigurationError(f"unknown method {method!r}")
        runtime[method] = fit_ms + (time.perf_counter() - t0) * 1e3
        for s, sc in out.items():
            scores[(method, s)] = sc
    return CellResult(scores, r2s, runtime, ens if keep_model else None)
