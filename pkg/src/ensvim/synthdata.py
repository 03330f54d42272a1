"""Synthetic benchmark data: Friedman 1, G-function, Ishigami, linear-Gaussian.

Inputs are drawn through an equicorrelated Gaussian copula, padded with
spurious columns up to ``d`` features, and the response receives additive
Gaussian noise whose scale is calibrated to a target signal-to-noise ratio.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from ._seeding import derive_seed, make_rng
from .exceptions import CalibrationError, ConfigurationError, DomainError

N_FEATURES = 20
N_MC_CALIBRATION = 10**6
LINEAR_BETAS = (2.0, 1.5, 1.0)
TRAIN_FRACTION = 2.0 / 3.0


def _friedman1(X):
    return (
        10.0 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20.0 * (X[:, 2] - 0.5) ** 2
        + 10.0 * X[:, 3]
        + 5.0 * X[:, 4]
    )


def gfunction_coefficients(d):
    # 1-based a_j on the first five columns, 100 elsewhere
    a = np.full(d, 100.0)
    k = min(d, 5)
    a[:k] = np.arange(1, k + 1)
    return a


def _gfunction(X):
    a = gfunction_coefficients(X.shape[1])
    return np.prod((np.abs(4.0 * X - 2.0) + a) / (1.0 + a), axis=1)


def _ishigami(X):
    return (
        np.sin(X[:, 0])
        + 7.0 * np.sin(X[:, 1]) ** 2
        + 0.1 * X[:, 2] ** 4 * np.sin(X[:, 0])
    )


def _linear(X):
    k = min(X.shape[1], len(LINEAR_BETAS))
    return X[:, :k] @ np.asarray(LINEAR_BETAS[:k])


@dataclass(frozen=True)
class DGP:
    name: str
    func: object
    n_active: int
    domain: tuple
    default_rho: float
    gaussian: bool = False
    # padding columns enter the response (weakly) and must be sampled for calibration
    uses_padding: bool = False


DGPS = {
    "friedman1": DGP("friedman1", _friedman1, 5, (0.0, 1.0), 0.0),
    "gfunction": DGP("gfunction", _gfunction, 5, (0.0, 1.0), 0.3, uses_padding=True),
    "ishigami": DGP("ishigami", _ishigami, 3, (-np.pi, np.pi), 0.3),
    "linear": DGP("linear", _linear, len(LINEAR_BETAS), (-np.inf, np.inf), 0.3, gaussian=True),
}


def get_dgp(name) -> DGP:
    try:
        return DGPS[name]
    except KeyError:
        raise ConfigurationError(f"unknown dgp {name!r}; expected one of {sorted(DGPS)}") from None


@dataclass
class DatasetMeta:
    dgp_name: str
    n: int
    d: int
    rho: float
    noise_sigma: float
    seed: int
    snr: float = 1.0


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    support: np.ndarray
    meta: DatasetMeta
    signal: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        signal = None if self.signal is None else self.signal[rows]
        return Dataset(self.X[rows], self.y[rows], self.support, self.meta, signal)


@dataclass(frozen=True)
class SnrSpec:
    target_snr: float
    signal_variance: float

    @property
    def noise_sigma(self):
        if math.isinf(self.target_snr):
            return 0.0
        return math.sqrt(self.signal_variance / self.target_snr)


def eval_dgp(dgp_name, x):
    """Noiseless response of a data-generating process.

    ``x`` may be a single feature vector or an ``(n, d)`` matrix; only the
    first ``n_active`` columns enter the response.
    """
    dgp = get_dgp(dgp_name)
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] < dgp.n_active:
        raise DomainError(f"{dgp_name} needs at least {dgp.n_active} features")
    out = dgp.func(X)
    return float(out[0]) if single else out


def correlated_uniforms(n, d, rho, lo=0.0, hi=1.0, seed=0):
    """Rows of equicorrelated uniforms on ``[lo, hi]`` via a Gaussian copula.

    The latent normals share a single common factor, which gives pairwise
    latent correlation ``rho`` at O(nd) cost. The Pearson correlation of
    the resulting uniforms is ``(6 / pi) * asin(rho / 2)``.
    """
    z = _equicorrelated_normals(n, d, rho, seed)
    return lo + (hi - lo) * ndtr(z)


def _equicorrelated_normals(n, d, rho, seed):
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")
    rng = make_rng("latent-normals", int(seed))
    z = rng.standard_normal((n, d))
    if rho > 0.0:
        common = rng.standard_normal(n)
        z = math.sqrt(1.0 - rho) * z + math.sqrt(rho) * common[:, None]
    return z


def sample_inputs(dgp_name, n, d, rho, seed):
    dgp = get_dgp(dgp_name)
    if dgp.gaussian:
        return _equicorrelated_normals(n, d, rho, seed)
    lo, hi = dgp.domain
    return correlated_uniforms(n, d, rho, lo, hi, seed)


def equicorrelated_covariance(d, rho):
    return (1.0 - rho) * np.eye(d) + rho * np.ones((d, d))


@functools.lru_cache(maxsize=64)
def calibrate_noise(dgp_name, rho=None, snr=1.0, n_mc=N_MC_CALIBRATION, seed=None,
                    d=N_FEATURES) -> SnrSpec:
    """Estimate Var(f*(X)) by Monte Carlo and derive the noise scale for ``snr``.

    Only the active columns are sampled unless the DGP's padding enters the
    response, as the G-function's ``a_j = 100`` factors do.
    """
    dgp = get_dgp(dgp_name)
    if n_mc < 10**4:
        raise DomainError("n_mc must be at least 1e4")
    if snr <= 0:
        raise DomainError("snr must be positive")
    rho = dgp.default_rho if rho is None else rho
    if seed is None:
        seed = derive_seed("calibration", dgp_name)
    n_cols = d if dgp.uses_padding else dgp.n_active
    chunk = 10**5
    values = []
    for k, start in enumerate(range(0, n_mc, chunk)):
        m = min(chunk, n_mc - start)
        X = sample_inputs(dgp_name, m, n_cols, rho, derive_seed(seed, k))
        values.append(dgp.func(X))
    variance = float(np.var(np.concatenate(values), ddof=1))
    if not variance > 0.0:
        raise CalibrationError(f"degenerate signal variance {variance} for {dgp_name}")
    return SnrSpec(float(snr), variance)


def support_mask(dgp_name, d):
    mask = np.zeros(d, dtype=bool)
    mask[: get_dgp(dgp_name).n_active] = True
    return mask


def generate(dgp_name, n, rho=None, snr=1.0, seed=0, d=N_FEATURES) -> Dataset:
    """Draw ``n`` samples from a benchmark DGP.

    ``rho=None`` uses the DGP's benchmark correlation (0 for Friedman 1,
    0.3 otherwise). ``snr=math.inf`` produces noiseless responses.
    """
    dgp = get_dgp(dgp_name)
    if n < 1:
        raise DomainError("n must be positive")
    if d < dgp.n_active:
        raise DomainError(f"{dgp_name} needs d >= {dgp.n_active}")
    rho = dgp.default_rho if rho is None else float(rho)
    sigma = calibrate_noise(dgp_name, rho, snr, d=d).noise_sigma
    X = sample_inputs(dgp_name, n, d, rho, derive_seed("inputs", dgp_name, n, seed))
    signal = dgp.func(X)
    noise = make_rng("noise", dgp_name, n, seed).standard_normal(n)
    y = signal + sigma * noise
    meta = DatasetMeta(dgp_name, n, d, rho, sigma, int(seed), float(snr))
    return Dataset(X, y, support_mask(dgp_name, d), meta, signal)


def train_test_split(ds: Dataset, train_fraction=TRAIN_FRACTION):
    """Contiguous split; rows are i.i.d. so no shuffling is needed."""
    n_train = int(round(train_fraction * ds.n))
    return ds.subset(slice(0, n_train)), ds.subset(slice(n_train, ds.n))


def write_dataset(ds: Dataset, path):
    """Write ``<path>`` as CSV (``x0..x{d-1},y``) plus a ``.json`` metadata sidecar."""
    path = Path(path)
    header = ",".join([f"x{j}" for j in range(ds.d)] + ["y"])
    np.savetxt(path, np.column_stack([ds.X, ds.y]), delimiter=",", header=header,
               comments="", fmt="%.17g")
    meta = {
        "dgp": ds.meta.dgp_name,
        "n": ds.meta.n,
        "d": ds.meta.d,
        "rho": ds.meta.rho,
        "noise_sigma": ds.meta.noise_sigma,
        "seed": ds.meta.seed,
        "snr": ds.meta.snr,
        "support": np.flatnonzero(ds.support).tolist(),
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2))
    return path, sidecar


def read_dataset(path) -> Dataset:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(path.with_suffix(".json").read_text())
    support = np.zeros(meta["d"], dtype=bool)
    support[meta["support"]] = True
    m = DatasetMeta(meta["dgp"], meta["n"], meta["d"], meta["rho"], meta["noise_sigma"],
                    meta["seed"], meta.get("snr", 1.0))
    return Dataset(data[:, :-1], data[:, -1], support, m)
