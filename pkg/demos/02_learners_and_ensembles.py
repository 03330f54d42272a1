"""
Learners and ensembles
======================

Bagging resamples the data; voting varies only the learner's own
randomization. Averaging members never increases the squared-error risk.
"""
import numpy as np

from ensvim import MlpConfig, TreeConfig, fit_ensemble, generate, pairwise_correlation, r2, train_test_split

train, test = train_test_split(generate("friedman1", 1500, seed=0))

for learner in (TreeConfig(), MlpConfig()):
    for kind in ("bagging", "voting"):
        ens = fit_ensemble(kind, learner, 10, train.X, train.y, master_seed=1)
        members = ens.predict_members(test.X)
        member_r2 = np.mean([r2(test.y, p) for p in members])
        print(f"{learner.kind:4s} {kind:7s} R2 ensemble={r2(test.y, ens.predict(test.X)):.3f} "
              f"mean member={member_r2:.3f} member corr={pairwise_correlation(ens, test.X):.2f}")
