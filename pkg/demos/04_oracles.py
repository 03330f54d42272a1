"""
Ground-truth oracles
====================

Closed-form LOCO for linear-Gaussian models, nested Monte-Carlo total Sobol
indices, and exact SAGE by enumerating all feature subsets.
"""
import numpy as np

from ensvim import TreeConfig, exact_sage_enumeration, fit_bagging, generate, train_test_split
from ensvim.importance import default_background, sage
from ensvim.oracle import montecarlo_total_sobol, true_loco_linear
from ensvim.synthdata import equicorrelated_covariance

np.set_printoptions(precision=3, suppress=True)
print("linear LOCO truth:", true_loco_linear([2.0, 1.5, 1.0, 0, 0], equicorrelated_covariance(5, 0.3)).scores)

sobol = montecarlo_total_sobol("friedman1", n_outer=4000, n_inner=200, seed=0, features=range(6))
print("friedman1 total Sobol:", sobol.scores[:6], "+/-", sobol.se[:6])

train, test = train_test_split(generate("friedman1", 600, seed=0, d=6))
ens = fit_bagging(TreeConfig(), 5, train.X, train.y, 0)
bg = default_background(train.X)
exact = exact_sage_enumeration(ens, test, bg)
sampled = sage(ens, test, bg, n_outer_perms=256)
print("SAGE exact:  ", exact.scores)
print("SAGE sampled:", sampled.scores, "+/-", sampled.se)
