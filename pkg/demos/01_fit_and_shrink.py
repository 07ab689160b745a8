"""Fit a logistic model, test a sub-hypothesis and compare the shrinkage family.

We simulate correlated predictors where the last three coefficients are small,
then look at how each estimator treats them.
"""

import numpy as np

from pretest_liu import Dataset, LinearRestriction, d_optimum, estimate_all, fit_mle
from pretest_liu.montecarlo import generate_design
from pretest_liu.restriction import test

rng = np.random.default_rng(3)
X = generate_design(300, 5, correlation_base=0.8, seed=rng)
beta = np.array([1.5, 2.5, 0.15, -0.1, 0.05])
y = (rng.random(300) < 1 / (1 + np.exp(-X @ beta))).astype(float)

model = fit_mle(Dataset(X, y))
print(f"converged in {model.iterations} iterations, log-likelihood {model.log_likelihood:.3f}")

# H0: the last three coefficients are zero
restr = LinearRestriction.zero_coefficients(5, [2, 3, 4])
res = test(model, restr, alpha=0.05)
print(f"Wald statistic {res.statistic:.3f} vs critical value {res.critical_value:.3f}")

d = d_optimum(model)  # the raw value can fall below 0; it is clamped to [0, 1]
print(f"plug-in biasing parameter d = {d:.3f}\n")

est = estimate_all(model, restr, d, alpha=0.05)
print(f"{'kind':6s} " + " ".join(f"b{j}".rjust(8) for j in range(5)) + "   sq. error")
for kind, r in est.items():
    err = float(np.sum((r.coefficients - beta) ** 2))
    print(f"{kind:6s} " + " ".join(f"{b:8.3f}" for b in r.coefficients) + f"   {err:.4f}")
print(f"{'truth':6s} " + " ".join(f"{b:8.3f}" for b in beta))
