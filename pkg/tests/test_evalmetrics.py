import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ensvim.evalmetrics import (
    bias_variance,
    default_epsilon,
    importance_mse,
    paired_sign_test,
    r2,
    relevance_labels,
    roc_auc,
)
from ensvim.exceptions import DomainError, ShapeError, UndefinedMetricError

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_mse_examples():
    assert importance_mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert importance_mse([0.0, 1.0], [1.0, 0.0]) == 1.0


def test_mse_subsets():
    support = np.array([True, False, True])
    est, truth = np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 0.0])
    assert importance_mse(est, truth, "support", support) == pytest.approx(5.0)
    assert importance_mse(est, truth, "null", support) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        importance_mse(est, truth, "null", np.ones(3, dtype=bool))
    with pytest.raises(ShapeError):
        importance_mse([1.0], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(arrays(float, 6, elements=finite), arrays(float, 6, elements=finite),
       arrays(bool, 6), st.permutations(range(6)))
def test_mse_permutation_equivariant(est, truth, support, perm):
    support[0], support[1] = True, False
    perm = np.array(perm)
    for subset in ("all", "support", "null"):
        a = importance_mse(est, truth, subset, support)
        b = importance_mse(est[perm], truth[perm], subset, support[perm])
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_decomposition_examples():
    dec = bias_variance(np.zeros((3, 2)), np.zeros(2))
    assert np.all(dec.mse == 0) and np.all(dec.bias_sq == 0) and np.all(dec.variance == 0)
    dec = bias_variance(np.array([[0.0], [2.0]]), np.array([0.0]))
    assert (dec.bias_sq[0], dec.variance[0], dec.mse[0]) == (1.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        bias_variance(np.zeros((1, 2)), np.zeros(2))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 12).flatmap(lambda r: arrays(float, (r, 4), elements=finite)),
       arrays(float, 4, elements=finite))
def test_decomposition_identity(runs, truth):
    dec = bias_variance(runs, truth)
    direct = np.mean((runs - truth) ** 2, axis=0)
    assert np.allclose(dec.mse, direct, rtol=1e-9, atol=1e-9)
    assert np.allclose(dec.mse, dec.bias_sq + dec.variance, rtol=1e-12, atol=0)
    assert np.all(dec.variance >= 0)


def test_auc_examples():
    assert roc_auc([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0
    assert roc_auc([0, 1, 2, 3], [1, 1, 0, 0]) == 0.0
    assert roc_auc([3, 1, 1, 0.5], [1, 1, 0, 0]) == 0.875
    with pytest.raises(UndefinedMetricError):
        roc_auc([1, 2], [1, 1])


def test_auc_hand_enumerated_ties():
    # positives (3, 1) vs negatives (1, 2): win, win, tie, loss -> 2.5 / 4
    assert roc_auc([3, 1, 2, 1], [1, 0, 0, 1]) == 0.625
    # positives (3, 2) vs negatives (1, 1): every pair is a win
    assert roc_auc([3, 1, 2, 1], [1, 0, 1, 0]) == 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.int64, 8, elements=st.integers(-50, 50)), arrays(bool, 8))
def test_auc_invariant_to_monotone_transform(scores, labels):
    # integer scores keep the transform strictly increasing in floating point
    labels[0], labels[1] = True, False
    assert roc_auc(scores, labels) == roc_auc(3 * np.exp(scores / 10) - 1, labels)


def test_r2_examples():
    y = np.array([0.0, 1.0, 2.0])
    assert r2(y, y) == 1.0
    assert r2(y, np.full(3, y.mean())) == 0.0
    assert r2(y, np.array([0.0, 0.0, 2.0])) == 0.5
    with pytest.raises(UndefinedMetricError):
        r2(np.ones(3), np.ones(3))


def test_relevance_labels():
    assert list(relevance_labels([0.5, 0.0, -0.1])) == [True, False, True]
    assert not relevance_labels([0.5, 0.1], 1.0).any()
    assert default_epsilon([2.0, -5.0]) == 0.05
    with pytest.raises(DomainError):
        relevance_labels([1.0], -1)


def test_sign_test():
    wins, n, p = paired_sign_test(np.zeros(10), np.ones(10))
    assert (wins, n) == (10, 10) and p == pytest.approx(0.5**10)
    assert paired_sign_test([1, 1], [1, 1]) == (0, 0, 1.0)


def test_relevance_labels_recover_friedman_support():
    # population LOCO of friedman1 is its total Sobol index vector
    from ensvim.oracle import montecarlo_total_sobol
    from ensvim.synthdata import support_mask

    truth = montecarlo_total_sobol("friedman1", n_outer=2000, n_inner=100, seed=0).scores
    assert np.array_equal(relevance_labels(truth, default_epsilon(truth)), support_mask("friedman1", 20))
