import numpy as np
import pytest

from biwcm.core import (
    GraphError,
    Mode,
    StrengthVectors,
    WeightedBipartiteGraph,
    build_graph,
    connectance,
    drop_isolated,
    strengths,
)


def test_build_graph_places_entries():
    g = build_graph(["a", "b"], ["x", "y"], [("a", "x", 2), ("b", "y", 3)])
    np.testing.assert_array_equal(g.weights, [[2, 0], [0, 3]])
    assert g.row_index("b") == 1 and g.col_index("x") == 0


def test_duplicate_entries_are_summed():
    g = build_graph(["a"], ["x"], [("a", "x", 1), ("a", "x", 1)])
    assert g.weights[0, 0] == 2


def test_negative_weight_rejected():
    with pytest.raises(GraphError, match="negative weight"):
        build_graph(["a"], ["x"], [("a", "x", -1)])


def test_unknown_label_named():
    with pytest.raises(GraphError, match="zz"):
        build_graph(["a"], ["x"], [("zz", "x", 1)])


def test_discrete_mode_rejects_fractions_naming_cell():
    with pytest.raises(GraphError, match=r"\(a, x\)"):
        build_graph(["a"], ["x"], [("a", "x", 1.5)], Mode.DISCRETE)


def test_graph_rejects_bad_input():
    with pytest.raises(GraphError):
        WeightedBipartiteGraph(("a", "a"), ("x",), np.ones((2, 1)))
    with pytest.raises(GraphError):
        WeightedBipartiteGraph(("a",), ("x",), np.ones((2, 1)))
    with pytest.raises(GraphError):
        WeightedBipartiteGraph(("a",), ("x",), np.array([[np.nan]]))
    with pytest.raises(GraphError, match="positive"):
        WeightedBipartiteGraph(("a",), ("x",), np.zeros((1, 1)))


def test_weights_are_read_only_copies():
    w = np.ones((2, 2))
    g = WeightedBipartiteGraph.from_matrix(w)
    w[0, 0] = 5
    assert g.weights[0, 0] == 1
    with pytest.raises(ValueError):
        g.weights[0, 0] = 3


@pytest.mark.parametrize(
    "w, s, sigma, total",
    [
        ([[2, 0], [0, 3]], [2, 3], [2, 3], 5),
        (np.ones((2, 3)), [3, 3], [2, 2, 2], 6),
        ([[0, 0], [0, 5]], [0, 5], [0, 5], 5),
    ],
)
def test_strengths(w, s, sigma, total):
    st = strengths(WeightedBipartiteGraph.from_matrix(w))
    np.testing.assert_array_equal(st.row_strengths, s)
    np.testing.assert_array_equal(st.col_strengths, sigma)
    assert st.total_weight == total


def test_strengths_from_marginals_checks_totals():
    st = StrengthVectors.from_marginals([1, 2], [3])
    assert st.total_weight == 3
    with pytest.raises(ValueError):
        StrengthVectors.from_marginals([1, 2], [4])


def test_drop_isolated():
    g = WeightedBipartiteGraph(("a", "b", "c"), ("x", "y"), np.array([[1, 0], [0, 0], [2, 0]]))
    reduced, rows, cols = drop_isolated(g)
    assert reduced.row_labels == ("a", "c") and reduced.col_labels == ("x",)
    assert rows == ["b"] and cols == ["y"]


@pytest.mark.parametrize(
    "m, expected", [([[1, 0], [0, 1]], 0.5), (np.zeros((3, 3)), 0.0), ([[1, 1], [1, 0]], 0.75)]
)
def test_connectance(m, expected):
    assert connectance(m) == expected


def test_connectance_empty_matrix():
    with pytest.raises(ValueError):
        connectance(np.zeros((0, 3)))
