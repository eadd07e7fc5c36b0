"""
Does the network know about the covariates?
===========================================

Draw a weighted graph whose latent positions depend linearly on node
covariates, embed it, and run the five permutation tests.
"""
# %%
import numpy as np

from netdep import ScenarioSpec, ase, generate_scenario, run_test, select_dimension

spec = ScenarioSpec("i", n=100, p=50, d=4, s=1.0, seed=1)
draw = generate_scenario(spec, rng=11)
A, Z = draw.graph.adjacency, draw.covariates
print(A.shape, Z.shape, draw.graph.kind)

# %%
# the first eigenvalue carries the mean of the latent positions and sits far
# above the rest, so the scree elbow lands on d = 1 here; when the dimension
# is known, pass it
vals = np.linalg.eigvalsh(A)
print("top eigenvalues", np.round(np.sort(vals)[::-1][:6], 1), "-> elbow at", select_dimension(vals))
d = spec.d
Xhat = ase(draw.graph, d).positions

# %%
for method in ("ridge", "lasso", "glasso", "cca", "netcca"):
    out = run_test(method, Z, Xhat=Xhat, A=A, n_perm=199, seed=5)
    print(f"{method:7s} statistic {out.observed:10.4g}   p = {out.p_value:.3f}")

# %%
# with s = 0 the covariates carry no information and p-values are uniform
null = generate_scenario(spec.with_s(0.0), rng=11)
Xnull = ase(null.graph, d).positions
print("cca under the null: p =", run_test("cca", null.covariates, Xhat=Xnull, n_perm=199, seed=5).p_value)
