"""
Importance of an ensemble vs averaged member importances
========================================================

LOCO, CFI and SAGE scored on the ensemble's averaged prediction
(``ensemble``) and averaged over the members' own scores (``sub_models``).
"""
import numpy as np

from ensvim import LinearConfig, MlpConfig, generate, run_pipeline

ds = generate("friedman1", 600, seed=3)
result = run_pipeline(ds, MlpConfig(), "bagging", B=5, methods=("loco", "cfi", "sage"), seed=0,
                      params={"sage": {"n_outer_perms": 32}})
np.set_printoptions(precision=2, suppress=True)
for (method, strategy), sc in sorted(result.scores.items()):
    print(f"{method:4s} {strategy:10s}", sc.scores[:8], "...")
print("test R2:", {k: round(v, 3) for k, v in result.r2.items()})

# with a linear learner the refit-based LOCO recovers beta_j^2 * Var(x_j | rest)
lin = run_pipeline(generate("linear", 4000, seed=1, d=5, snr=10), LinearConfig(), "bagging", B=3,
                   methods=("loco",), seed=0)
print("linear LOCO:", lin.scores[("loco", "ensemble")].scores)
