"""Monte Carlo level and power experiments.

Replicate ``r`` of every cell draws its data from the stream
``(master_seed, 2, r)`` and its permutations from a seed taken off
``(master_seed, 3, r)``. Cells that differ only in ``s`` therefore share
``Z``, the noise and the permutations, which keeps power curves smooth, and
rerunning a table with the same master seed reproduces it exactly whatever
the number of workers.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import isotonic_regression

from ._rng import stream
from .embedding import ase, select_dimension
from .errors import NetDepError
from .graph_model import ScenarioSpec, generate_scenario
from .permtest import METHODS, run_test

Z99 = 2.576
PRESETS = {"full": {"mc_reps": 1000, "n_perm": 100}, "quick": {"mc_reps": 200, "n_perm": 50}}


@dataclass(frozen=True)
class ExperimentGrid:
    scenario: ScenarioSpec
    s_values: Sequence[float] = (0.0,)
    n_values: Optional[Sequence[int]] = None
    p_values: Optional[Sequence[int]] = None
    methods: Sequence[str] = METHODS
    mc_reps: int = 200
    n_perm: int = 100
    alpha: float = 0.05
    master_seed: int = 0
    dim: str = "true"
    d_max: Optional[int] = None

    def __post_init__(self):
        if self.dim not in ("true", "auto"):
            raise ValueError("dim must be 'true' (embed at the generating d) or 'auto'")
        if self.mc_reps < 1:
            raise ValueError("mc_reps must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods: {', '.join(bad)}")

    @classmethod
    def preset(cls, name, scenario, **kw):
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        return cls(scenario, **{**PRESETS[name], **kw})

    def cells(self):
        ns = self.n_values or (self.scenario.n,)
        ps = self.p_values or (self.scenario.p,)
        for n in ns:
            for p in ps:
                for s in self.s_values:
                    yield replace(self.scenario, n=int(n), p=int(p), s=float(s))


def wald_ci(rate, reps, z=Z99):
    half = z * math.sqrt(max(rate * (1 - rate), 0.0) / reps)
    return rate - half, rate + half


@dataclass
class RejectionTable:
    rows: list = field(default_factory=list)
    p_values: dict = field(default_factory=dict)
    timings: list = field(default_factory=list)

    FIELDS = ("method", "scenario", "s", "n", "p", "rate", "ci_low", "ci_high", "mc_reps", "failed")

    def add(self, method, spec, rejections, reps, failed):
        rate = rejections / reps if reps else float("nan")
        lo, hi = wald_ci(rate, reps) if reps else (float("nan"), float("nan"))
        self.rows.append(dict(method=method, scenario=spec.scenario.value, s=spec.s, n=spec.n, p=spec.p,
                              rate=rate, ci_low=lo, ci_high=hi, mc_reps=reps, failed=failed))

    def rate(self, method, **where):
        hits = [r for r in self.rows if r["method"] == method and all(r[k] == v for k, v in where.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {method} {where}")
        return hits[0]["rate"]

    @property
    def failed(self):
        return sum(r["failed"] for r in self.rows)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.FIELDS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        if path is not None:
            Path(path).write_text(buf.getvalue(), encoding="utf-8")
        return buf.getvalue()

    def timings_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "scenario", "s", "n", "p", "mean_seconds", "fits"])
        for t in self.timings:
            w.writerow([t["method"], t["scenario"], t["s"], t["n"], t["p"], repr(t["mean_seconds"]), t["fits"]])
        if path is not None:
            Path(path).write_text(buf.getvalue(), encoding="utf-8")
        return buf.getvalue()

    def pretty(self):
        head = f"{'method':<8} {'scen':>4} {'s':>5} {'n':>5} {'p':>5} {'Est.':>7} {'99% CI':>17} {'reps':>5} {'fail':>4}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r['method']:<8} {r['scenario']:>4} {r['s']:>5.2f} {r['n']:>5} {r['p']:>5} "
                f"{r['rate']:>7.3f} [{r['ci_low']:>6.3f}, {r['ci_high']:>6.3f}] {r['mc_reps']:>5} {r['failed']:>4}"
            )
        return "\n".join(lines)


def embedding_dimension(graph, spec, dim="true", d_max=None):
    """``spec.d``, or the scree elbow capped at ``d_max`` (20 for scenario iv)."""
    if dim == "true":
        return spec.d
    if d_max is None and spec.scenario.value == "iv":
        d_max = 20
    return select_dimension(np.linalg.eigvalsh(graph.adjacency), d_max)


def simulate_replicate(spec: ScenarioSpec, methods, n_perm, master_seed, r, dim="true", d_max=None):
    """p-values and timings of every method on replicate ``r`` of ``spec``.

    A method whose statistic raises a package error gets ``nan`` and its
    message; the other methods are unaffected.
    """
    draw = generate_scenario(spec, stream(master_seed, 2, r))
    perm_seed = int(stream(master_seed, 3, r).integers(2**31 - 1))
    A = draw.graph.adjacency
    Xhat = None
    embed_error = None
    if any(m != "netcca" for m in methods):
        try:
            Xhat = ase(draw.graph, embedding_dimension(draw.graph, spec, dim, d_max)).positions
        except NetDepError as exc:
            embed_error = str(exc)
    out = {}
    for m in methods:
        if m != "netcca" and Xhat is None:
            out[m] = (float("nan"), 0.0, embed_error)
            continue
        t0 = time.perf_counter()
        try:
            res = run_test(m, draw.covariates, Xhat=Xhat, A=A, n_perm=n_perm, seed=perm_seed)
            out[m] = (res.p_value, time.perf_counter() - t0, None)
        except NetDepError as exc:
            out[m] = (float("nan"), time.perf_counter() - t0, str(exc))
    return out


def run_cell(spec, methods, mc_reps, n_perm, master_seed, n_jobs=1, dim="true", d_max=None):
    if n_jobs == 1:
        results = [simulate_replicate(spec, methods, n_perm, master_seed, r, dim, d_max) for r in range(mc_reps)]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(simulate_replicate)(spec, methods, n_perm, master_seed, r, dim, d_max) for r in range(mc_reps)
        )
    pvals = {m: np.array([res[m][0] for res in results]) for m in methods}
    secs = {m: np.array([res[m][1] for res in results]) for m in methods}
    errors = {m: [res[m][2] for res in results if res[m][2] is not None] for m in methods}
    return pvals, secs, errors


def _run(grid: ExperimentGrid, n_jobs=1):
    table = RejectionTable()
    for spec in grid.cells():
        pvals, secs, _ = run_cell(spec, grid.methods, grid.mc_reps, grid.n_perm, grid.master_seed, n_jobs,
                                  grid.dim, grid.d_max)
        for m in grid.methods:
            p = pvals[m]
            ok = ~np.isnan(p)
            table.add(m, spec, int(np.count_nonzero(p[ok] <= grid.alpha)), int(ok.sum()), int((~ok).sum()))
            table.p_values[(m, spec.scenario.value, spec.s, spec.n, spec.p)] = p
            table.timings.append(dict(method=m, scenario=spec.scenario.value, s=spec.s, n=spec.n, p=spec.p,
                                      mean_seconds=float(secs[m].mean()), fits=int(secs[m].size)))
    return table


def run_level_experiment(grid: ExperimentGrid, n_jobs=1) -> RejectionTable:
    """Rejection rates at ``s = 0``; failed replicates are excluded and counted."""
    if any(s != 0 for s in grid.s_values):
        raise ValueError("a level experiment needs s = 0 in every cell")
    return _run(grid, n_jobs)


def isotonic_deviation(s_values, rates):
    """Largest gap between ``rates`` and their best non-decreasing fit in ``s``."""
    order = np.argsort(s_values)
    r = np.asarray(rates, dtype=float)[order]
    fit = isotonic_regression(r).x
    return float(np.max(np.abs(r - fit)))


def run_power_curve(grid: ExperimentGrid, n_jobs=1):
    """Rejection rate per method and ``s`` plus the monotonicity diagnostic.

    Returns ``(table, diagnostics)`` where ``diagnostics[method]`` holds the
    isotonic deviation and two Monte Carlo standard errors at the worst
    point for comparison.
    """
    table = _run(grid, n_jobs)
    diag = {}
    for m in grid.methods:
        rows = [r for r in table.rows if r["method"] == m]
        s = [r["s"] for r in rows]
        rates = [r["rate"] for r in rows]
        dev = isotonic_deviation(s, rates)
        se = max(math.sqrt(max(r["rate"] * (1 - r["rate"]), 0.25 / r["mc_reps"]) / r["mc_reps"])
                 for r in rows)
        diag[m] = {"isotonic_deviation": dev, "two_se": 2 * se, "monotone": dev <= 2 * se}
    return table, diag


def qq_data(p_values):
    """``((i - 0.5) / N, p_(i))`` for the sorted p-values."""
    p = np.sort(np.asarray(p_values, dtype=float))
    if p.size == 0:
        raise ValueError("need at least one p-value")
    u = (np.arange(1, p.size + 1) - 0.5) / p.size
    return np.column_stack([u, p])


def write_qq_csv(p_values, path):
    q = qq_data(p_values)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["uniform_quantile", "p_value"])
        for u, p in q:
            w.writerow([repr(float(u)), repr(float(p))])
