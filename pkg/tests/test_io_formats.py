import numpy as np
import pytest

from netdep.errors import AsymmetricInput, MissingNode, NonNumericCell, ParseError
from netdep.graph_model import Graph, ScenarioSpec, generate_scenario
from netdep.io_formats import (Dataset, export_covariates_csv, export_edge_list, load_covariates_csv,
                               load_dataset, load_edge_list, read_json, write_json)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_reversed_pair_is_one_edge(tmp_path):
    el = load_edge_list(_write(tmp_path, "g", "a b\nb a\n"))
    assert el.node_ids == ["a", "b"]
    assert el.graph.adjacency.tolist() == [[0, 1], [1, 0]]
    assert el.duplicates == 1


def test_self_loop_dropped_and_counted(tmp_path):
    el = load_edge_list(_write(tmp_path, "g", "a a\na b\n"))
    assert el.self_loops_dropped == 1
    assert np.trace(el.graph.adjacency) == 0
    kept = load_edge_list(_write(tmp_path, "h", "a a\na b\n"), self_loops="keep")
    assert kept.graph.adjacency[0, 0] == 1


def test_weighted_duplicates_last_wins(tmp_path):
    el = load_edge_list(_write(tmp_path, "g", "1 2 0.5\n2 1 0.25\n"), weighted=True)
    assert el.graph.adjacency[0, 1] == el.graph.adjacency[1, 0] == 0.25


def test_weight_detection(tmp_path):
    assert load_edge_list(_write(tmp_path, "g", "1 2 3.5\n"), weighted=None).graph.kind == "weighted"
    assert load_edge_list(_write(tmp_path, "h", "1 2\n"), weighted=None).graph.kind == "binary"


@pytest.mark.parametrize("text", ["a\n", "a b c d\n", "a b x\n", "a b inf\n", "# nodes q\n1 2 1\n"])
def test_parse_errors_carry_line(tmp_path, text):
    with pytest.raises(ParseError) as exc:
        load_edge_list(_write(tmp_path, "g", "# header\n" + text), weighted=True)
    assert ":2:" in str(exc.value)


def test_asymmetric_input(tmp_path):
    with pytest.raises(AsymmetricInput):
        load_edge_list(_write(tmp_path, "g", "a b\n"), symmetrize=False)
    el = load_edge_list(_write(tmp_path, "h", "a b\nb a\n"), symmetrize=False)
    assert el.graph.adjacency[0, 1] == 1


@pytest.mark.parametrize("scenario", ["i", "v"])
def test_graph_round_trip_bit_identical(tmp_path, scenario):
    d = generate_scenario(ScenarioSpec(scenario, 80, 5, 3, 1.0, seed=2), rng=9)
    path = tmp_path / "g.edges"
    export_edge_list(d.graph, path)
    back = load_edge_list(path, weighted=d.graph.kind == "weighted", self_loops="keep")
    assert back.graph.kind == d.graph.kind
    assert np.array_equal(back.graph.adjacency, d.graph.adjacency)


def test_isolated_nodes_survive(tmp_path):
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = 1
    path = tmp_path / "g"
    export_edge_list(Graph(A, "binary"), path)
    assert load_edge_list(path).graph.n == 4


def test_covariates_reordered(tmp_path):
    p = _write(tmp_path, "c.csv", "id,x,y\nc,3,30\na,1,10\nb,2,20\n")
    cov = load_covariates_csv(p, ["a", "b", "c"])
    assert cov.values.tolist() == [[1, 10], [2, 20], [3, 30]]
    assert cov.columns == ["x", "y"]


def test_missing_node_lists_ids(tmp_path):
    p = _write(tmp_path, "c.csv", "id,x\na,1\n")
    with pytest.raises(MissingNode) as exc:
        load_covariates_csv(p, ["a", "b"])
    assert exc.value.ids == ["b"]


def test_non_numeric_cell_coordinates(tmp_path):
    p = _write(tmp_path, "c.csv", "id,x,y\na,1,2\nb,3,oops\n")
    with pytest.raises(NonNumericCell) as exc:
        load_covariates_csv(p, ["a", "b"])
    assert (exc.value.row, exc.value.column) == (3, "y")


@pytest.mark.parametrize("text", ["", "id\n", "id,x\na,1,2\n", "id,x\na,1\na,2\n"])
def test_covariate_parse_errors(tmp_path, text):
    with pytest.raises(ParseError):
        load_covariates_csv(_write(tmp_path, "c.csv", text), ["a"])


def test_one_hot_thirteen_categories(tmp_path, rng):
    n = 60
    cat = rng.integers(13, size=n)
    onehot = np.eye(13)[cat]
    path = tmp_path / "prot.csv"
    export_covariates_csv(onehot, path, node_ids=[f"P{i}" for i in range(n)])
    cov = load_covariates_csv(path, [f"P{i}" for i in rng.permutation(n)])
    assert cov.values.shape == (n, 13)
    assert np.all(cov.values.sum(axis=1) == 1)
    assert set(np.unique(cov.values)) == {0.0, 1.0}


def test_covariate_round_trip(tmp_path, rng):
    Z = rng.standard_normal((30, 4)) * 10.0 ** rng.integers(-8, 8, size=(30, 4))
    path = tmp_path / "z.csv"
    export_covariates_csv(Z, path)
    assert np.array_equal(load_covariates_csv(path, list(range(30))).values, Z)


def test_dataset_alignment(tmp_path):
    _write(tmp_path, "g", "x y\ny z\n")
    _write(tmp_path, "c.csv", "node,a\nz,3\ny,2\nx,1\n")
    ds = load_dataset(tmp_path / "g", tmp_path / "c.csv")
    assert ds.node_ids == ["x", "y", "z"]
    assert ds.covariates.values[:, 0].tolist() == [1, 2, 3]
    with pytest.raises(ValueError):
        Dataset(ds.graph, type(ds.covariates)(np.zeros((2, 1)), ["a"], ["x", "y"]))


def test_json_handles_numpy(tmp_path):
    write_json({"a": np.arange(3), "b": np.float64(0.5), "c": np.int64(2)}, tmp_path / "o.json")
    assert read_json(tmp_path / "o.json") == {"a": [0, 1, 2], "b": 0.5, "c": 2}
