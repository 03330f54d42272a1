"""Scoring importance estimates against ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import DomainError, ShapeError, UndefinedMetricError

SUBSETS = ("all", "support", "null")


@dataclass
class DecompositionResult:
    mse: np.ndarray
    bias_sq: np.ndarray
    variance: np.ndarray
    n_runs: int

    def mean_over(self, mask=None):
        """``(mse, bias_sq, variance)`` averaged over the features in ``mask``."""
        sel = slice(None) if mask is None else np.asarray(mask, dtype=bool)
        return (float(self.mse[sel].mean()), float(self.bias_sq[sel].mean()),
                float(self.variance[sel].mean()))


def _select(subset, support, d):
    if subset == "all":
        return np.ones(d, dtype=bool)
    if subset not in SUBSETS:
        raise DomainError(f"subset must be one of {SUBSETS}")
    if support is None:
        raise DomainError(f"subset={subset!r} needs a support mask")
    support = np.asarray(support, dtype=bool)
    return support if subset == "support" else ~support


def importance_mse(estimates, truth, subset="all", support=None) -> float:
    """Mean squared error over the selected features."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ShapeError("estimates and truth differ in length")
    sel = _select(subset, support, len(truth))
    if not sel.any():
        raise DomainError(f"subset {subset!r} selects no features")
    return float(np.mean((estimates[sel] - truth[sel]) ** 2))


def bias_variance(run_estimates, truth) -> DecompositionResult:
    """Per-feature split of the MSE across runs into squared bias and variance.

    Variance uses the population convention (divide by the number of runs)
    so that ``mse == bias_sq + variance``.
    """
    runs = np.asarray(run_estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if runs.ndim != 2 or runs.shape[1] != truth.shape[0]:
        raise ShapeError("run_estimates must be (R, d) with d = len(truth)")
    if runs.shape[0] < 2:
        raise DomainError("need at least two runs")
    mean = runs.mean(axis=0)
    bias_sq = (mean - truth) ** 2
    variance = np.mean((runs - mean) ** 2, axis=0)
    return DecompositionResult(bias_sq + variance, bias_sq, variance, runs.shape[0])


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(relevant outranks irrelevant), ties counted one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ShapeError("scores and labels differ in length")
    pos, neg = scores[labels], scores[~labels]
    if len(pos) == 0 or len(neg) == 0:
        raise UndefinedMetricError("AUC needs at least one relevant and one irrelevant feature")
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (len(pos) * len(neg)))


def r2(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 is undefined for a constant target")
    return float(1.0 - np.sum((y - yhat) ** 2) / ss_tot)


def relevance_labels(truth, epsilon=0.0):
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    return np.abs(np.asarray(truth, dtype=float)) > epsilon


def default_epsilon(truth, fraction=1e-2):
    return fraction * float(np.max(np.abs(truth)))


def paired_sign_test(smaller, larger):
    """One-sided sign test that ``smaller < larger`` in paired replicates.

    Ties are dropped. Returns ``(wins, n_untied, p_value)``.
    """
    a = np.asarray(smaller, dtype=float)
    b = np.asarray(larger, dtype=float)
    wins = int(np.sum(a < b))
    n = int(np.sum(a != b))
    if n == 0:
        return 0, 0, 1.0
    return wins, n, float(stats.binomtest(wins, n, 0.5, alternative="greater").pvalue)
