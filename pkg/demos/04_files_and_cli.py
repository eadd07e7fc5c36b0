"""
Files in, JSON out
==================

Round trip a simulated data set through the edge-list and CSV formats and
run the same test through the command line.
"""
# %%
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from netdep import ScenarioSpec, generate_scenario
from netdep.io_formats import export_covariates_csv, export_edge_list, load_dataset

tmp = Path(tempfile.mkdtemp())
draw = generate_scenario(ScenarioSpec("v", 120, 10, 3, 2.0, seed=4), rng=1)
export_edge_list(draw.graph, tmp / "g.edges")
export_covariates_csv(draw.covariates, tmp / "z.csv")

ds = load_dataset(tmp / "g.edges", tmp / "z.csv")
print(np.array_equal(ds.graph.adjacency, draw.graph.adjacency), ds.covariates.values.shape)

# %%
cmd = [sys.executable, "-m", "netdep", "test", "--graph", str(tmp / "g.edges"), "--cov", str(tmp / "z.csv"),
       "--method", "netcca", "--n-perm", "99", "--seed", "2", "--no-replicates"]
out = json.loads(subprocess.run(cmd, capture_output=True, text=True, check=True).stdout)
print(out["method"], out["p_value"], out["config"]["tau"])
