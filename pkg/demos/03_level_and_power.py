"""
A small level and power study
=============================

Rejection rates at alpha = 0.05 for two cheap methods as the signal grows.
Replicates share their data and permutations across s, so the curve is
smooth even with few replicates. Takes about a minute.
"""
# %%
from netdep import ScenarioSpec
from netdep.bench import ExperimentGrid, qq_data, run_power_curve

grid = ExperimentGrid(ScenarioSpec("i", 80, 20, 2, 0.0), s_values=(0.0, 0.25, 0.5, 1.0),
                      methods=("cca", "netcca"), mc_reps=40, n_perm=99, master_seed=3)
table, diag = run_power_curve(grid)
print(table.pretty())
print({m: round(v["isotonic_deviation"], 3) for m, v in diag.items()})

# %%
# QQ points of the null p-values against Uniform(0, 1)
q = qq_data(table.p_values[("cca", "i", 0.0, 80, 20)])
print(q[::8].round(3))
