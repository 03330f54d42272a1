"""Multilayer perceptron regressor trained by minibatch Adam with early stopping.

Many networks can be trained in lockstep (``MlpConfig.fit_many``): their
weights are stacked along a leading model axis and every step is a batched
matmul. Each network keeps its own rows, column mask, seed, validation split
and early-stopping state, so the result for a network does not depend on
which other networks share its batch.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import ConfigurationError, ShapeError, TrainingDivergenceError
from .base import LearnerConfig, Predictor, resolve_columns

# upper bound on networks trained together, and on the floats touched per
# validation chunk
MAX_MODELS_PER_BATCH = 256
_VALIDATION_CHUNK_FLOATS = 8 * 10**6

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpConfig(LearnerConfig):
    hidden: tuple = (64, 32, 8)
    max_epochs: int = 500
    patience: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 64
    validation_fraction: float = 0.1
    activation: str = "relu"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    kind = "mlp"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigurationError("hidden layer sizes must be positive")
        if self.max_epochs < 1 or not 0 <= self.patience <= self.max_epochs:
            raise ConfigurationError("need 1 <= max_epochs and 0 <= patience <= max_epochs")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must lie in (0, 1)")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(f"activation must be one of {_ACTIVATIONS}")

    def to_dict(self):
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        out["type"] = self.kind
        return out

    def fit_many(self, X, y, jobs):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ShapeError("X must be (n, d) and y (n,)")
        if not np.all(np.isfinite(y)):
            raise ConfigurationError("y must be finite")
        results = [None] * len(jobs)
        # networks with equal row counts share minibatch boundaries
        groups = {}
        for i, job in enumerate(jobs):
            n_rows = X.shape[0] if job.rows is None else len(job.rows)
            groups.setdefault(n_rows, []).append(i)
        for n_rows in sorted(groups):
            idx = groups[n_rows]
            for start in range(0, len(idx), MAX_MODELS_PER_BATCH):
                chunk = idx[start:start + MAX_MODELS_PER_BATCH]
                models = _train_lockstep(self, X, y, [jobs[i] for i in chunk], chunk)
                for i, model in zip(chunk, models):
                    results[i] = model
        return results


def mlp_fit(config: MlpConfig, X, y, seed, rows=None, columns=None):
    return config.fit(X, y, seed, rows=rows, columns=columns)


def glorot_init(fan_in, fan_out, seed):
    """Uniform Glorot weights on ``[-sqrt(6/(fan_in+fan_out)), +...]``.

    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(seed))
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _activate(z, name):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(a, name):
    if name == "relu":
        return (a > 0.0).astype(a.dtype)
    return 1.0 - a * a


def _forward(weights, biases, a0, activation):
    """Return the list of layer outputs; the last entry is the linear output."""
    acts = [a0]
    a = a0
    last = len(weights) - 1
    for k, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        a = z if k == last else _activate(z, activation)
        acts.append(a)
    return acts


def _backward(weights, acts, dout, activation):
    n_layers = len(weights)
    grads_w = [None] * n_layers
    grads_b = [None] * n_layers
    delta = dout
    for k in range(n_layers - 1, -1, -1):
        a_in = acts[k]
        grads_w[k] = np.swapaxes(a_in, -1, -2) @ delta
        grads_b[k] = delta.sum(axis=-2, keepdims=True)
        if k > 0:
            delta = (delta @ np.swapaxes(weights[k], -1, -2)) * _activation_grad(acts[k], activation)
    return grads_w, grads_b


def loss_and_gradients(weights, biases, X, y, activation="relu"):
    """Mean squared error of a single network and its analytic gradients.

    Biases are 1-D vectors here. Used for gradient checking.
    """
    bs = [b[None, :] for b in biases]
    acts = _forward(weights, bs, np.asarray(X, dtype=float), activation)
    resid = acts[-1][:, 0] - y
    loss = float(np.mean(resid**2))
    dout = (2.0 / len(y)) * resid[:, None]
    gw, gb = _backward(weights, acts, dout, activation)
    return loss, gw, [g[0] for g in gb]


class MLPRegressor(Predictor):
    kind = "mlp"

    def __init__(self, config, seed, columns, feature_count, weights, biases,
                 x_offset, x_scale, y_offset, y_scale, history=None, best_epoch=None):
        self.config = config
        self.seed = seed
        self.columns = tuple(columns)
        self.feature_count = feature_count
        self.weights = weights
        self.biases = biases
        self.x_offset = x_offset
        self.x_scale = x_scale
        self.y_offset = y_offset
        self.y_scale = y_scale
        self.history = history or []
        self.best_epoch = best_epoch

    def predict(self, X):
        X = self._check(X)
        a = (X - self.x_offset) * self.x_scale
        acts = _forward(self.weights, [b[None, :] for b in self.biases], a, self.config.activation)
        return acts[-1][:, 0] * self.y_scale + self.y_offset

    def state_dict(self):
        return {
            "columns": list(self.columns),
            "feature_count": self.feature_count,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_offset": self.x_offset.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_offset": self.y_offset,
            "y_scale": self.y_scale,
            "history": list(self.history),
            "best_epoch": self.best_epoch,
        }

    @classmethod
    def from_state(cls, config, seed, state):
        cfg = dict(config)
        cfg.pop("type", None)
        return cls(
            MlpConfig(**cfg), seed, state["columns"], state["feature_count"],
            [np.asarray(w) for w in state["weights"]], [np.asarray(b) for b in state["biases"]],
            np.asarray(state["x_offset"]), np.asarray(state["x_scale"]),
            state["y_offset"], state["y_scale"], state["history"], state["best_epoch"],
        )


@dataclass
class _NetState:
    rng: np.random.Generator
    columns: tuple
    fit_rows: np.ndarray
    val_rows: np.ndarray
    x_offset: np.ndarray
    x_scale: np.ndarray
    y_offset: float
    y_scale: float
    history: list = field(default_factory=list)
    best_val: float = math.inf
    best_epoch: int = -1
    wait: int = 0
    best_w: list | None = None
    best_b: list | None = None
    # 0 for a constant target, whose standardized version is identically zero
    out_scale: float = 1.0


def _prepare(config, X, y, job):
    d = X.shape[1]
    rng = np.random.Generator(np.random.Philox(int(job.seed)))
    rows = np.arange(X.shape[0]) if job.rows is None else np.asarray(job.rows, dtype=np.intp)
    columns = resolve_columns(job.columns, d)
    perm = rng.permutation(len(rows))
    n_val = max(1, int(math.ceil(config.validation_fraction * len(rows))))
    if len(rows) - n_val < 1:
        raise ConfigurationError("too few rows to hold out a validation set")
    val_rows, fit_rows = rows[perm[:n_val]], rows[perm[n_val:]]

    cols = np.asarray(columns, dtype=np.intp)
    x_offset = np.zeros(d)
    x_scale = np.zeros(d)
    Xf = X[fit_rows][:, cols]
    sd = Xf.std(axis=0)
    sd[sd == 0.0] = 1.0
    x_offset[cols] = Xf.mean(axis=0)
    x_scale[cols] = 1.0 / sd
    yf = y[fit_rows]
    y_std = float(yf.std())
    y_scale = y_std or 1.0

    sizes = [len(columns), *config.hidden, 1]
    weights, biases = [], []
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        W = glorot_init(fan_in, fan_out, rng)
        if k == 0:
            full = np.zeros((d, fan_out))
            full[cols] = W
            W = full
        weights.append(W)
        biases.append(np.zeros(fan_out))
    state = _NetState(rng, columns, fit_rows, val_rows, x_offset, x_scale, float(yf.mean()), y_scale,
                      out_scale=y_std and y_scale)
    return state, weights, biases


def _train_lockstep(config, X, y, jobs, job_ids):
    prepared = [_prepare(config, X, y, job) for job in jobs]
    states = [p[0] for p in prepared]
    n_layers = len(config.hidden) + 1
    W = [np.stack([p[1][k] for p in prepared]) for k in range(n_layers)]
    B = [np.stack([p[2][k] for p in prepared])[:, None, :] for k in range(n_layers)]
    mW = [np.zeros_like(w) for w in W]
    vW = [np.zeros_like(w) for w in W]
    mB = [np.zeros_like(b) for b in B]
    vB = [np.zeros_like(b) for b in B]

    active = list(range(len(jobs)))
    fit_rows = np.stack([s.fit_rows for s in states])
    val_rows = np.stack([s.val_rows for s in states])
    offsets = np.stack([s.x_offset for s in states])[:, None, :]
    scales = np.stack([s.x_scale for s in states])[:, None, :]
    y_off = np.array([s.y_offset for s in states])[:, None]
    y_sc = np.array([s.y_scale for s in states])[:, None]
    n_fit = fit_rows.shape[1]
    bs = config.batch_size
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.epsilon
    act = config.activation
    t = 0

    for epoch in range(config.max_epochs):
        perms = np.stack([states[i].rng.permutation(n_fit) for i in active])
        order = np.take_along_axis(fit_rows, perms, axis=1)
        train_loss = np.zeros(len(active))
        for start in range(0, n_fit, bs):
            idx = order[:, start:start + bs]
            xb = (X[idx] - offsets) * scales
            yb = (y[idx] - y_off) / y_sc
            acts = _forward(W, B, xb, act)
            resid = acts[-1][:, :, 0] - yb
            train_loss += (resid**2).sum(axis=1)
            dout = (2.0 / idx.shape[1]) * resid[:, :, None]
            gW, gB = _backward(W, acts, dout, act)
            t += 1
            c1 = 1.0 - b1**t
            c2 = 1.0 - b2**t
            for params, grads, m, v in ((W, gW, mW, vW), (B, gB, mB, vB)):
                for k in range(n_layers):
                    g = grads[k]
                    m[k] = b1 * m[k] + (1.0 - b1) * g
                    v[k] = b2 * v[k] + (1.0 - b2) * (g * g)
                    params[k] = params[k] - lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)

        bad = ~np.isfinite(train_loss)
        val_mse = _validation_mse(W, B, X, y, val_rows, offsets, scales, y_off, y_sc, act)
        bad |= ~np.isfinite(val_mse)
        if bad.any():
            raise TrainingDivergenceError(epoch, job_ids[active[int(np.argmax(bad))]])

        keep = []
        for pos, i in enumerate(active):
            s = states[i]
            s.history.append(float(val_mse[pos]))
            if val_mse[pos] < s.best_val:
                s.best_val = float(val_mse[pos])
                s.best_epoch = epoch
                s.wait = 0
                s.best_w = [w[pos].copy() for w in W]
                s.best_b = [b[pos, 0].copy() for b in B]
            else:
                s.wait += 1
            if s.wait < config.patience and epoch + 1 < config.max_epochs:
                keep.append(pos)
        if len(keep) < len(active):
            sel = np.asarray(keep, dtype=np.intp)
            active = [active[p] for p in keep]
            if not active:
                break
            W = [w[sel] for w in W]
            B = [b[sel] for b in B]
            mW = [m[sel] for m in mW]
            vW = [v[sel] for v in vW]
            mB = [m[sel] for m in mB]
            vB = [v[sel] for v in vB]
            fit_rows, val_rows = fit_rows[sel], val_rows[sel]
            offsets, scales = offsets[sel], scales[sel]
            y_off, y_sc = y_off[sel], y_sc[sel]

    d = X.shape[1]
    return [
        MLPRegressor(config, int(job.seed), s.columns, d, s.best_w, s.best_b,
                     s.x_offset, s.x_scale, s.y_offset, s.out_scale, s.history, s.best_epoch)
        for job, s in zip(jobs, states)
    ]


def _validation_mse(W, B, X, y, val_rows, offsets, scales, y_off, y_sc, act):
    n_models, n_val = val_rows.shape
    width = max(X.shape[1], max(w.shape[-1] for w in W))
    step = max(1, _VALIDATION_CHUNK_FLOATS // (n_val * width))
    out = np.empty(n_models)
    for s in range(0, n_models, step):
        sl = slice(s, s + step)
        xv = (X[val_rows[sl]] - offsets[sl]) * scales[sl]
        pred = _forward([w[sl] for w in W], [b[sl] for b in B], xv, act)[-1][:, :, 0]
        yv = (y[val_rows[sl]] - y_off[sl]) / y_sc[sl]
        out[sl] = np.mean((pred - yv) ** 2, axis=1) * (y_sc[sl, 0] ** 2)
    return out

