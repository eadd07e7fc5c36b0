"""
The first two knots of the group-LASSO path
===========================================

The covariance test only needs the penalty where the first covariate
enters and the penalty where the second one does. Both come in closed form
from the Gram matrices; here they are checked against the solver.
"""
# %%
import numpy as np

from netdep import compute_knot_data, cov_test_statistic, group_lasso_fit

rng = np.random.default_rng(0)
Z = rng.standard_normal((60, 8))
X = 0.6 * Z[:, [2]] @ rng.standard_normal((1, 3)) + rng.standard_normal((60, 3))

k = compute_knot_data(X, Z)
print("first covariate in:", k.m, " lambda1 = %.5f  lambda2 = %.5f" % (k.lambda1, k.lambda2))

# %%
# walk down the path and watch the support
for lam in np.linspace(1.05 * k.lambda1, 0.9 * k.lambda2, 8):
    fit = group_lasso_fit(X, Z, lam)
    print("lambda %.4f  support %s" % (lam, fit.support.tolist()))

# %%
T = cov_test_statistic(k, sigma2=1.0, n=60, d=3).statistic
print("T_cov with unit noise variance: %.3f" % T)
