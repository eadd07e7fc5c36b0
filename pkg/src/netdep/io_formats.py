"""Edge lists, covariate tables and JSON artifacts.

Edge lists are whitespace-separated ``u v [w]`` lines; ``#`` starts a
comment. The writer emits a ``# nodes N`` header so that isolated nodes of
an integer-labelled graph survive a round trip, and prints weights with
``repr`` (shortest string that reads back to the same double).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import AsymmetricInput, MissingNode, NonNumericCell, ParseError
from .graph_model import Graph

__all__ = [
    "Covariates", "Dataset", "EdgeList", "load_edge_list", "export_edge_list",
    "load_covariates_csv", "export_covariates_csv", "load_dataset", "write_json", "read_json",
]


@dataclass(frozen=True)
class EdgeList:
    graph: Graph
    node_ids: list
    self_loops_dropped: int = 0
    duplicates: int = 0


@dataclass(frozen=True)
class Covariates:
    values: np.ndarray
    columns: list
    node_ids: list


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    covariates: Covariates

    def __post_init__(self):
        if self.covariates.values.shape[0] != self.graph.n:
            raise ValueError(
                f"{self.covariates.values.shape[0]} covariate rows for {self.graph.n} nodes"
            )
        if len(set(self.node_ids)) != len(self.node_ids):
            raise ValueError("node ids must be unique")

    @property
    def node_ids(self):
        return self.covariates.node_ids


def _label(tok):
    try:
        return int(tok)
    except ValueError:
        return tok


def load_edge_list(path, weighted=False, symmetrize=True, self_loops="drop") -> EdgeList:
    """Read an edge list into a dense adjacency matrix.

    ``weighted=None`` decides from the first edge line. Repeated pairs keep
    the last weight (weighted) or are OR-ed (binary).
    Self-loops are dropped and counted unless ``self_loops="keep"``. With
    ``symmetrize=False`` each line sets one entry only and the result must
    already be symmetric.
    """
    if self_loops not in ("drop", "keep"):
        raise ValueError("self_loops must be 'drop' or 'keep'")
    path = Path(path)
    declared = None
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "nodes":
                    try:
                        declared = int(parts[1])
                    except ValueError:
                        raise ParseError(path, lineno, f"bad node count {parts[1]!r}") from None
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, f"expected 'u v' or 'u v w', got {len(parts)} fields")
            if weighted is None:
                weighted = len(parts) == 3
            if len(parts) == 3 and not weighted:
                raise ParseError(path, lineno, "weight given but the graph was read as binary")
            if len(parts) == 2 and weighted:
                raise ParseError(path, lineno, "missing weight")
            w = 1.0
            if weighted:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError(path, lineno, f"weight {parts[2]!r} is not a number") from None
                if not math.isfinite(w):
                    raise ParseError(path, lineno, f"weight {parts[2]!r} is not finite")
            rows.append((_label(parts[0]), _label(parts[1]), w))

    labels = {}
    for u, v, _ in rows:
        labels.setdefault(u, None)
        labels.setdefault(v, None)
    ids = list(labels)
    if all(isinstance(x, int) for x in ids):
        ids = sorted(ids)
        if declared is not None:
            if ids and (ids[0] < 0 or ids[-1] >= declared):
                raise ParseError(path, 1, f"labels outside 0..{declared - 1} with '# nodes {declared}'")
            ids = list(range(declared))
    index = {x: i for i, x in enumerate(ids)}
    n = len(ids)
    A = np.zeros((n, n))
    seen = set()
    dropped = dup = 0
    for u, v, w in rows:
        i, j = index[u], index[v]
        if i == j and self_loops == "drop":
            dropped += 1
            continue
        key = (min(i, j), max(i, j)) if symmetrize else (i, j)
        if key in seen:
            dup += 1
        seen.add(key)
        val = w if weighted else 1.0
        A[i, j] = val
        if symmetrize:
            A[j, i] = val
    if not symmetrize and not np.array_equal(A, A.T):
        i, j = np.argwhere(A != A.T)[0]
        raise AsymmetricInput(f"entry ({ids[i]}, {ids[j]}) differs from ({ids[j]}, {ids[i]})")
    return EdgeList(Graph(A, "weighted" if weighted else "binary"), ids, dropped, dup)


def export_edge_list(graph, path, node_ids: Optional[Sequence] = None):
    """Write the upper triangle (diagonal included) of a symmetric graph."""
    A = graph.adjacency if isinstance(graph, Graph) else np.asarray(graph, dtype=float)
    weighted = not isinstance(graph, Graph) or graph.kind == "weighted"
    n = A.shape[0]
    ids = list(range(n)) if node_ids is None else list(node_ids)
    iu, ju = np.nonzero(np.triu(A) != 0)
    with Path(path).open("w", encoding="utf-8") as fh:
        if node_ids is None:
            fh.write(f"# nodes {n}\n")
        for i, j in zip(iu, ju):
            if weighted:
                fh.write(f"{ids[i]}\t{ids[j]}\t{float(A[i, j])!r}\n")
            else:
                fh.write(f"{ids[i]}\t{ids[j]}\n")


def load_covariates_csv(path, node_ids: Sequence) -> Covariates:
    """Read a header-first CSV keyed by its first column, reordered to ``node_ids``.

    Rows for nodes not in ``node_ids`` are ignored.
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file; a header row is required") from None
        if len(header) < 2:
            raise ParseError(path, 1, "header needs an id column and at least one covariate")
        columns = header[1:]
        table = {}
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            key = row[0].strip()
            if key in table:
                raise ParseError(path, lineno, f"duplicate node id {key!r}")
            vals = []
            for name, cell in zip(columns, row[1:]):
                try:
                    x = float(cell)
                except ValueError:
                    x = math.nan
                if not math.isfinite(x):
                    raise NonNumericCell(lineno, name, cell)
                vals.append(x)
            table[key] = vals
    missing = [x for x in node_ids if str(x) not in table]
    if missing:
        raise MissingNode(missing)
    values = np.array([table[str(x)] for x in node_ids], dtype=float).reshape(len(node_ids), len(columns))
    return Covariates(values, columns, list(node_ids))


def export_covariates_csv(values, path, node_ids: Optional[Sequence] = None,
                          columns: Optional[Sequence] = None):
    values = np.asarray(values, dtype=float)
    n, p = values.shape
    ids = list(range(n)) if node_ids is None else list(node_ids)
    cols = [f"z{j + 1}" for j in range(p)] if columns is None else list(columns)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", *cols])
        for i in range(n):
            w.writerow([ids[i], *(repr(float(x)) for x in values[i])])


def load_dataset(edges_path, covariates_path, weighted=False, **kw) -> Dataset:
    el = load_edge_list(edges_path, weighted=weighted, **kw)
    return Dataset(el.graph, load_covariates_csv(covariates_path, el.node_ids))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path):
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=_jsonable)
        fh.write("\n")


def read_json(path):
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)
