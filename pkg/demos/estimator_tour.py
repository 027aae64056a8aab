"""
Turnover estimators side by side
================================

Each estimator predicts the turnover of a weighted portfolio from the
alphas' own turnovers and the covariance of their returns.  When every alpha
has the same turnover-to-volatility ratio kappa, all of them agree with
kappa * sqrt(x' C x).
"""

import numpy as np

from crossturn import EstimatorInputs, kl_pairwise, kl_spectral, new_estimators, theoretical

# two alphas: the pairwise estimate moves from max to sum as rho goes 0 -> 1
for rho in (0.0, 0.5, 1.0):
    print(f"pairwise, rho={rho}: {kl_pairwise(0.4, 0.2, 0.5, 0.5, rho):.3f}")

# the spectral form uses eigenvalues and eigenvectors of the matrix
print("spectral on the identity:", kl_spectral(EstimatorInputs([1, 1, 1], [0.1, 0.2, 0.3], np.eye(3))))

# equal ratios tau/std = 20
inputs = EstimatorInputs([0.5, 0.5], [0.2, 0.4], np.diag([1e-4, 4e-4]))
print("sigma:", inputs.sigma)
print("theoretical:", theoretical(inputs))
print("new estimators:", new_estimators(inputs))

# once the ratios differ the means disagree, and the theoretical form refuses
inputs = EstimatorInputs([0.3, 0.7], [0.5, 0.2], [[1e-4, 2e-5], [2e-5, 4e-4]])
print("\nunequal ratios:", {k: round(v, 4) for k, v in new_estimators(inputs).items()})
try:
    theoretical(inputs)
except ValueError as exc:
    print("theoretical:", exc)
print("with kappa given:", theoretical(EstimatorInputs(inputs.weights, inputs.taus, inputs.cov, kappa=30.0)))
