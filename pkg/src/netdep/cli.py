"""Command-line entry point: ``netdep {simulate,embed,test,bench,qq}``.

Exit codes: 0 success, 2 invalid configuration, 3 generation error,
4 statistic error (a JSON error report is written), 5 benchmark finished
with failed replicates.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import fresh_seed
from .bench import ExperimentGrid, PRESETS, run_power_curve, write_qq_csv
from .embedding import ase, select_dimension
from .errors import InvalidSpec, NetDepError
from .graph_model import Scenario, ScenarioSpec, generate_scenario
from .io_formats import (export_covariates_csv, export_edge_list, load_covariates_csv,
                         load_edge_list, write_json)
from .permtest import METHODS, run_test

EXIT_CONFIG, EXIT_GENERATION, EXIT_STATISTIC, EXIT_PARTIAL = 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _threads(args):
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("NETDEP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidSpec(f"NETDEP_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _seed(args):
    if args.seed is None:
        args.seed = fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _fail(code, message):
    print(f"netdep: {message}", file=sys.stderr)
    return code


def cmd_simulate(args):
    try:
        spec = ScenarioSpec(args.scenario, args.n, args.p, args.d, args.s, _seed(args))
    except InvalidSpec as exc:
        return _fail(EXIT_CONFIG, str(exc))
    try:
        draw = generate_scenario(spec)
    except NetDepError as exc:
        return _fail(EXIT_GENERATION, f"generation failed: {exc}")
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    export_edge_list(draw.graph, f"{prefix}.edges")
    export_covariates_csv(draw.covariates, f"{prefix}.cov.csv")
    truth = {
        "config": dict(line.split(" = ") for line in spec.to_config().splitlines()),
        "graph_kind": draw.graph.kind,
        "X": draw.latent,
        "B": draw.coefficients,
        "groups": draw.groups,
    }
    write_json(truth, f"{prefix}.truth.json")
    print(f"wrote {prefix}.edges, {prefix}.cov.csv, {prefix}.truth.json")
    return 0


def _resolve_dim(args, A, d_max=None):
    if args.dim == "auto":
        full = np.linalg.eigvalsh(0.5 * (A + A.T))[::-1]
        d = select_dimension(full, d_max)
        mags = np.sort(np.abs(full))[::-1]
        print(f"selected d = {d}; leading |eigenvalues|: "
              + ", ".join(f"{x:.4g}" for x in mags[:max(10, d + 2)]), file=sys.stderr)
        return d
    try:
        d = int(args.dim)
    except ValueError:
        raise InvalidSpec(f"--dim must be 'auto' or a positive integer, got {args.dim!r}") from None
    if d < 1:
        raise InvalidSpec("--dim must be >= 1")
    return d


def _weighted_flag(value):
    return {"auto": None, "yes": True, "no": False}[value]


def cmd_embed(args):
    el = load_edge_list(args.graph, weighted=_weighted_flag(args.weighted))
    try:
        d = _resolve_dim(args, el.graph.adjacency, args.d_max)
    except InvalidSpec as exc:
        return _fail(EXIT_CONFIG, str(exc))
    emb = ase(el.graph, d)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", encoding="utf-8", newline="")
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["node", *(f"x{k + 1}" for k in range(d))])
        for node, row in zip(el.node_ids, emb.positions):
            w.writerow([node, *(repr(float(x)) for x in row)])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_test(args):
    seed = _seed(args)
    config = {
        "graph": str(args.graph), "covariates": str(args.cov), "method": args.method,
        "dim": args.dim, "n_perm": args.n_perm, "tau": args.tau, "gamma": args.gamma, "seed": seed,
    }

    def report_error(exc, code):
        payload = {"error": type(exc).__name__, "message": str(exc), "config": config}
        if args.json_out:
            write_json(payload, args.json_out)
        else:
            print(json.dumps(payload, indent=2))
        return _fail(code, f"{type(exc).__name__}: {exc}")

    if args.n_perm < 1:
        return _fail(EXIT_CONFIG, "--n-perm must be >= 1")
    try:
        el = load_edge_list(args.graph, weighted=_weighted_flag(args.weighted))
        cov = load_covariates_csv(args.cov, el.node_ids)
    except NetDepError as exc:
        return report_error(exc, EXIT_CONFIG)
    A, Z = el.graph.adjacency, cov.values
    n = A.shape[0]
    config["n"] = n
    config["p"] = Z.shape[1]
    config["self_loops_dropped"] = el.self_loops_dropped
    if args.method == "netcca":
        config["tau"] = math.sqrt(n) if args.tau is None else args.tau
        Xhat = None
    else:
        try:
            d = _resolve_dim(args, A)
        except InvalidSpec as exc:
            return report_error(exc, EXIT_CONFIG)
        config["dim_selected"] = d
        try:
            Xhat = ase(el.graph, d).positions
        except NetDepError as exc:
            return report_error(exc, EXIT_STATISTIC)
    try:
        out = run_test(args.method, Z, Xhat=Xhat, A=A, n_perm=args.n_perm, seed=seed,
                       tau=args.tau, gamma=args.gamma, config=config, n_jobs=_threads(args))
    except NetDepError as exc:
        return report_error(exc, EXIT_STATISTIC)
    text = out.to_json(include_replicates=not args.no_replicates, indent=2)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if out.per_dimension is not None:
        for e in out.per_dimension:
            print(f"dimension {e['dimension']}: p = {e['p_value']:.4g}", file=sys.stderr)
        print(f"Bonferroni: p = {out.p_value:.4g}", file=sys.stderr)
    return 0


def cmd_bench(args):
    try:
        scenario = Scenario.parse(args.scenario)
        methods = tuple(m.strip() for m in args.methods.split(",")) if args.methods else METHODS
        spec = ScenarioSpec(scenario, args.n, args.p, args.d, 0.0, 0)
        kw = {}
        if args.mc_reps is not None:
            kw["mc_reps"] = args.mc_reps
        if args.n_perm is not None:
            kw["n_perm"] = args.n_perm
        grid = ExperimentGrid.preset(args.preset, spec, s_values=tuple(args.s_values), methods=methods,
                                     master_seed=_seed(args), alpha=args.alpha, dim=args.dim,
                                     d_max=args.d_max, **kw)
    except (InvalidSpec, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table, diag = run_power_curve(grid, n_jobs=_threads(args))
    stem = f"scenario_{scenario.value}"
    table.to_csv(out / f"{stem}_rejections.csv")
    table.timings_csv(out / f"{stem}_timing.csv")
    (out / f"{stem}_table.txt").write_text(table.pretty() + "\n", encoding="utf-8")
    write_json({"grid": {"scenario": scenario.value, "n": args.n, "p": args.p, "d": args.d,
                         "s_values": list(args.s_values), "methods": list(methods),
                         "mc_reps": grid.mc_reps, "n_perm": grid.n_perm, "alpha": grid.alpha,
                         "master_seed": grid.master_seed, "preset": args.preset,
                         "dim": grid.dim, "d_max": grid.d_max},
                "monotonicity": diag}, out / f"{stem}_config.json")
    for (m, sc, s, n, p), pv in table.p_values.items():
        ok = pv[~np.isnan(pv)]
        if ok.size:
            write_qq_csv(ok, out / f"{stem}_qq_{m}_s{s:g}.csv")
    print(table.pretty())
    if table.failed:
        counts = {}
        for r in table.rows:
            if r["failed"]:
                counts[f"{r['method']} s={r['s']:g}"] = r["failed"]
        return _fail(EXIT_PARTIAL, "failed replicates: " + ", ".join(f"{k}: {v}" for k, v in counts.items()))
    return 0


def _read_p_values(path):
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        items = data if isinstance(data, list) else [data]
        return [float(x["p_value"]) for x in items]
    vals = []
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return vals
    col = 0
    if "p_value" in rows[0]:
        col = rows[0].index("p_value")
        rows = rows[1:]
    for row in rows:
        if row and row[col].strip():
            vals.append(float(row[col]))
    return vals


def cmd_qq(args):
    p = []
    for path in args.inputs:
        try:
            p.extend(_read_p_values(path))
        except (ValueError, KeyError) as exc:
            return _fail(EXIT_CONFIG, f"{path}: {exc}")
    if not p:
        return _fail(EXIT_CONFIG, "no p-values found")
    write_qq_csv(p, args.out)
    print(f"wrote {len(p)} points to {args.out}")
    return 0


def build_parser():
    ap = _Parser(prog="netdep", description="Dependence tests between network structure and node covariates.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="draw a scenario and write edges, covariates and truth")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=200)
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--s", type=float, default=0.0)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out-prefix", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("embed", help="adjacency spectral embedding as CSV")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--weighted", choices=("auto", "yes", "no"), default="auto")
    sp.add_argument("--dim", default="auto")
    sp.add_argument("--d-max", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("test", help="permutation test of dependence")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--cov", required=True)
    sp.add_argument("--weighted", choices=("auto", "yes", "no"), default="auto")
    sp.add_argument("--method", required=True, choices=METHODS)
    sp.add_argument("--dim", default="auto")
    sp.add_argument("--n-perm", type=int, default=100)
    sp.add_argument("--tau", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--json-out")
    sp.add_argument("--no-replicates", action="store_true")
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("bench", help="Monte Carlo rejection rates")
    sp.add_argument("--preset", choices=tuple(PRESETS), default="quick")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--methods")
    sp.add_argument("--s-values", type=float, nargs="+", default=[0.0])
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=200)
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--dim", choices=("true", "auto"), default="true")
    sp.add_argument("--d-max", type=int)
    sp.add_argument("--mc-reps", type=int)
    sp.add_argument("--n-perm", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("qq", help="QQ data of p-values against Uniform(0, 1)")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_qq)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidSpec as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except (NetDepError, OSError) as exc:
        return _fail(EXIT_CONFIG, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
