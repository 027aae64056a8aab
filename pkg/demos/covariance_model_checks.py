"""
Where covariance-only turnover models hold and where they break
===============================================================

Whitening turns any admissible set of returns into uncorrelated unit
variables.  The standard deviation is the one functional whose ratio to
volatility is constant, and the pairwise composition rule fails for it by
a factor of two along a short chain of combinations.
"""

import numpy as np

from crossturn.statistics import sample_covariance, whiten
from crossturn.theory import (
    admissible_sample,
    check_admissible,
    compare_equicorrelation,
    proposition_counterexample,
    run_theory_checks,
    std_functional,
    verify_theorem_condition,
)

x = admissible_sample(seed=1, m=20_000, n=3, corr=0.4)
print("admissible:", check_admissible(x).passed)

white, transform = whiten(x)
print("covariance after whitening:\n", np.round(sample_covariance(white).matrix, 12))

report = verify_theorem_condition(std_functional(x, 3.0), x)
print(f"3*std / std over {len(report.ratios)} combinations: min {report.min:.12f} max {report.max:.12f}")

# a duplicated column is not admissible; the report names the culprit
dup = np.column_stack([x[:, 0], x[:, 0], x[:, 1]])
print("duplicate column direction:", np.round(check_admissible(dup).direction, 4))

print("composition rule relative error for std:", proposition_counterexample(x))

for rho in (0.0, 0.25, 0.5, 1.0):
    c = compare_equicorrelation(1.0, rho, 4)
    print(f"equicorrelation rho={rho}: linear rule {c.prior:.4f}, square-root rule {c.theoretical:.4f}")

print()
for row in run_theory_checks(seed=0, m=50_000):
    print(f"{row['check']:32s} {row['measured']:.3e}  {'ok' if row['passed'] else 'FAILED'}")
