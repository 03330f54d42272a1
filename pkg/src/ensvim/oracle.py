"""Independent ground-truth generators for importance scores.

* ``asymptotic_importance``: the full pipeline run at n = 1e5, cached on disk.
* ``exact_sage_enumeration``: Shapley values over every subset at small d.
* ``true_loco_linear``: closed-form LOCO for a linear model with Gaussian inputs.
* ``montecarlo_total_sobol``: nested Monte Carlo under independent inputs.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from ._seeding import derive_seed, make_rng
from .exceptions import DomainError, RefusalError, UnsupportedDependenceError
from .importance import METHODS, ImputationGame, loco_from_restricted
from .importance._common import check_strategies
from .learners import config_from_dict
from .synthdata import N_FEATURES, generate, get_dgp, sample_inputs

PROVENANCES = ("asymptotic", "enumeration", "analytic", "montecarlo")
ASYMPTOTIC_N = 10**5
MAX_ENUMERATION_D = 10
SOBOL_N_OUTER = 2 * 10**4
SOBOL_N_INNER = 500
TRUTH_SEED = 20240101


@dataclass
class GroundTruth:
    scores: np.ndarray
    provenance: str
    n_used: int
    se: np.ndarray

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        self.scores = np.asarray(self.scores, dtype=float)
        self.se = np.asarray(self.se, dtype=float)
        if not np.all(np.isfinite(self.se)):
            raise DomainError("standard errors must be finite")


# Asymptotic truth -------------------------------------------------------

def _config_dict(model_config):
    return model_config if isinstance(model_config, dict) else model_config.to_dict()


def truth_key(dgp, method, model_config, strategy="ensemble", ensembling="bagging", B=10,
              n=ASYMPTOTIC_N, seed=TRUTH_SEED, rho=None, snr=1.0, d=N_FEATURES, params=None):
    """Stable identifier of one truth cell."""
    payload = {
        "dgp": dgp, "method": method, "model": _config_dict(model_config), "strategy": strategy,
        "ensembling": ensembling, "B": B, "n": n, "seed": seed, "rho": rho, "snr": snr,
        "d": d, "params": params or {},
    }
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def _atomic_write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=1)
        os.chmod(tmp, 0o644)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_truth(path):
    with open(path) as fh:
        rec = json.load(fh)
    return GroundTruth(np.array(rec["scores"]), rec["provenance"], rec["n_used"], np.array(rec["se"]))


def asymptotic_importances(methods, dgp, model_config, strategy="ensemble", seed=TRUTH_SEED,
                           ensembling="bagging", B=10, n=ASYMPTOTIC_N, rho=None, snr=1.0,
                           d=N_FEATURES, params=None, cache_dir=None):
    """Truth vectors for several methods from a single large-sample fit.

    Returns ``{method: GroundTruth}``. With ``cache_dir`` set, each vector is
    read from or written to ``<cache_dir>/<key>.json``.
    """
    from .pipeline import run_pipeline

    params = params or {}
    strategy = check_strategies(strategy)[0]
    for m in methods:
        if m not in METHODS:
            raise DomainError(f"unknown method {m!r}")
    config = config_from_dict(model_config) if isinstance(model_config, dict) else model_config
    keys = {m: truth_key(dgp, m, config, strategy, ensembling, B, n, seed, rho, snr, d,
                         params.get(m)) for m in methods}
    out, missing = {}, []
    for m in methods:
        path = None if cache_dir is None else Path(cache_dir) / f"{keys[m]}.json"
        if path is not None and path.exists():
            out[m] = _read_truth(path)
        else:
            missing.append(m)
    if missing:
        ds = generate(dgp, n, rho=rho, snr=snr, seed=seed, d=d)
        cell = run_pipeline(ds, config, ensembling, B, missing, (strategy,), seed, params)
        for m in missing:
            sc = cell.scores[(m, strategy)]
            truth = GroundTruth(sc.scores, "asymptotic", n, sc.se)
            out[m] = truth
            if cache_dir is not None:
                _atomic_write_json(Path(cache_dir) / f"{keys[m]}.json", {
                    "dgp": dgp, "method": m, "model_config_hash": config.key(),
                    "scores": truth.scores.tolist(), "se": truth.se.tolist(),
                    "n_used": n, "provenance": "asymptotic", "strategy": strategy,
                    "ensembling": ensembling, "B": B, "seed": seed, "r2": cell.r2,
                })
    return {m: out[m] for m in methods}


def asymptotic_importance(method, dgp, model_config, strategy="ensemble", seed=TRUTH_SEED,
                          **kwargs) -> GroundTruth:
    """Importance estimated by the full pipeline at n = 1e5, treated as truth."""
    return asymptotic_importances((method,), dgp, model_config, strategy, seed, **kwargs)[method]


# Exact SAGE ---------------------------------------------------------------

def exact_sage_enumeration(model, test, background, n_cal=32, seed=0, strategy="ensemble",
                           max_d=MAX_ENUMERATION_D) -> GroundTruth:
    """Shapley values of the imputation game by enumerating every subset.

    Uses the same value function (background rows and imputation draws for a
    given ``seed``) as ``sage``, so the two differ only by ordering sampling.
    """
    d = np.asarray(test.X).shape[1]
    if d > max_d:
        raise RefusalError(f"enumeration over 2^{d} subsets refused; d must be <= {max_d}")
    strategy = check_strategies(strategy)[0]
    game = ImputationGame(model, test.X, test.y, background, n_cal, seed)
    phi = np.zeros((d, len(game.members) + 1))
    for j in range(d):
        others = [k for k in range(d) if k != j]
        for size in range(d):
            weight = 1.0 / (d * math.comb(d - 1, size))
            for S in combinations(others, size):
                phi[j] += weight * (game.value(S + (j,)) - game.value(S))
    scores = phi[:, 0] if strategy == "ensemble" else phi[:, 1:].mean(axis=1)
    return GroundTruth(scores, "enumeration", len(game.y), np.zeros(d))


# Analytic linear-Gaussian LOCO -----------------------------------------

def true_loco_linear(betas, covariance) -> GroundTruth:
    """``beta_j^2 * Var(X_j | X_-j)`` for Gaussian inputs with covariance ``covariance``."""
    beta = np.asarray(betas, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    d = len(beta)
    if cov.shape != (d, d):
        raise DomainError("covariance shape does not match betas")
    if not np.allclose(cov, cov.T):
        raise DomainError("covariance must be symmetric")
    # raises LinAlgError when not positive definite
    np.linalg.cholesky(cov)
    # Var(X_j | X_-j) = 1 / (Sigma^-1)_jj
    cond_var = 1.0 / np.diag(np.linalg.inv(cov))
    return GroundTruth(beta**2 * cond_var, "analytic", 0, np.zeros(d))


# Nested Monte-Carlo total Sobol -------------------------------------------

def _marginal_draws(dgp, size, rng):
    if dgp.gaussian:
        return rng.standard_normal(size)
    lo, hi = dgp.domain
    return rng.uniform(lo, hi, size)


def montecarlo_total_sobol(dgp, n_outer=SOBOL_N_OUTER, n_inner=SOBOL_N_INNER, seed=0, rho=None,
                           d=N_FEATURES, features=None, chunk_rows=2 * 10**5) -> GroundTruth:
    """Total Sobol indices ``E[Var(f*(X) | X_-j)]`` of a DGP's regression function.

    Each of ``n_outer`` outer rows gets ``n_inner`` fresh draws of column
    ``j``; the per-row sample variances are averaged. The standard error is
    the jackknife over outer rows, which for a mean is ``sd / sqrt(n_outer)``.
    Features outside ``features`` are reported as 0 with zero SE.
    """
    spec = get_dgp(dgp)
    rho = spec.default_rho if rho is None else rho
    if rho > 0:
        raise UnsupportedDependenceError(
            f"nested Monte Carlo needs independent inputs; {dgp} has rho={rho}")
    if n_outer < 2 or n_inner < 2:
        raise DomainError("n_outer and n_inner must be at least 2")
    features = range(d) if features is None else features
    outer = sample_inputs(dgp, n_outer, d, 0.0, derive_seed("sobol-outer", seed))
    scores, se = np.zeros(d), np.zeros(d)
    per_chunk = max(1, chunk_rows // n_inner)
    for j in features:
        rng = make_rng("sobol-inner", seed, j)
        cond_var = np.empty(n_outer)
        for start in range(0, n_outer, per_chunk):
            rows = outer[start:start + per_chunk]
            m = len(rows)
            X = np.repeat(rows, n_inner, axis=0)
            X[:, j] = _marginal_draws(spec, m * n_inner, rng)
            f = spec.func(X).reshape(m, n_inner)
            cond_var[start:start + m] = f.var(axis=1, ddof=1)
        scores[j] = cond_var.mean()
        se[j] = cond_var.std(ddof=1) / math.sqrt(n_outer)
    return GroundTruth(scores, "montecarlo", n_outer * n_inner, se)


# Oracle stub predictors ----------------------------------------------------

class FunctionPredictor:
    """Wraps a known regression function as a predictor."""

    def __init__(self, func):
        self.func = func

    def predict(self, X):
        return np.asarray(self.func(np.asarray(X, dtype=float)), dtype=float)


class ConditionalExpectationPredictor:
    """``E[f(X) | X_-j]`` under an independent marginal for column ``j``.

    The inner expectation uses ``n_inner`` midpoint quantile nodes of the
    marginal, a deterministic stratified rule.
    """

    def __init__(self, func, j, marginal=("uniform", 0.0, 1.0), n_inner=SOBOL_N_INNER,
                 chunk_rows=2 * 10**5):
        self.func = func
        self.j = j
        self.chunk_rows = chunk_rows
        u = (np.arange(n_inner) + 0.5) / n_inner
        kind = marginal[0]
        if kind == "uniform":
            lo, hi = marginal[1], marginal[2]
            self.nodes = lo + (hi - lo) * u
        elif kind == "normal":
            self.nodes = ndtri(u)
        else:
            raise DomainError(f"unknown marginal {kind!r}")

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        k = len(self.nodes)
        out = np.empty(X.shape[0])
        step = max(1, self.chunk_rows // k)
        for start in range(0, X.shape[0], step):
            rows = X[start:start + step]
            Z = np.repeat(rows, k, axis=0)
            Z[:, self.j] = np.tile(self.nodes, len(rows))
            out[start:start + len(rows)] = self.func(Z).reshape(len(rows), k).mean(axis=1)
        return out


def dgp_marginal(dgp):
    spec = get_dgp(dgp)
    return ("normal",) if spec.gaussian else ("uniform", *spec.domain)


def stub_loco(func, X_test, y_test, marginal, features, n_inner=SOBOL_N_INNER):
    """LOCO of the oracle pair (f*, E[f* | X_-j]) on a test sample.

    Returns the ensemble-strategy ``ImportanceScores`` (B = 1, so both
    strategies coincide).
    """
    full = [FunctionPredictor(func)]
    restricted = {j: [ConditionalExpectationPredictor(func, j, marginal, n_inner)] for j in features}
    return loco_from_restricted(full, restricted, X_test, y_test, ("ensemble",))["ensemble"]
