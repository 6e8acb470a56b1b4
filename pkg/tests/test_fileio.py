import os

import numpy as np
import pytest

from biwcm.core import Mode, WeightedBipartiteGraph
from biwcm.fileio import (
    ParseError,
    dense_tsv,
    detect_format,
    edgelist_csv,
    fmt,
    read_graph,
    read_matrix,
    write_outputs,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_fmt_round_trips_doubles():
    for v in [0.1, 1 / 3, 2.0 ** -40, 123456.789, np.pi * 1e10]:
        assert float(fmt(v)) == v
    assert fmt(3.0) == "3"
    assert fmt(-0.0) == "0"


def test_detect_format():
    assert detect_format("a.tsv") == "dense"
    assert detect_format("a.csv") == "edgelist"
    assert detect_format("a.csv", "dense") == "dense"
    with pytest.raises(ValueError):
        detect_format("a.csv", "xml")


def test_edgelist_first_appearance_order_and_sums(tmp_path):
    p = write(tmp_path, "e.csv", "row,col,weight\nb,y,1\na,x,2\nb,y,3\n")
    g = read_graph(p)
    assert g.row_labels == ("b", "a")
    assert g.col_labels == ("y", "x")
    np.testing.assert_array_equal(g.weights, [[4, 0], [0, 2]])


def test_edgelist_without_weight_column(tmp_path):
    p = write(tmp_path, "e.csv", "row_label,col_label\na,x\nb,x\n")
    np.testing.assert_array_equal(read_graph(p).weights, [[1], [1]])


def test_malformed_row_names_line(tmp_path):
    p = write(tmp_path, "e.csv", "row,col,weight\na,x,1\nb,y,abc\n")
    with pytest.raises(ParseError, match=r":3: .*'abc'") as info:
        read_graph(p)
    assert info.value.line == 3


def test_short_row_and_bad_header(tmp_path):
    with pytest.raises(ParseError, match=":2:"):
        read_graph(write(tmp_path, "a.csv", "row,col,weight\na,x\n"))
    with pytest.raises(ParseError, match="header"):
        read_graph(write(tmp_path, "b.csv", "foo,bar\n"))
    with pytest.raises(ParseError, match="empty"):
        read_graph(write(tmp_path, "c.csv", ""))


def test_discrete_rejects_fraction_naming_cell(tmp_path):
    p = write(tmp_path, "e.csv", "row,col,weight\na,x,1\nb,y,2.5\n")
    with pytest.raises(ParseError, match=r"\(b, y\)"):
        read_graph(p, Mode.DISCRETE)
    assert read_graph(p, Mode.CONTINUOUS).weights[1, 1] == 2.5


def test_dense_round_trip(tmp_path):
    w = np.array([[1.5, 0.0, 2.0], [0.0, 1 / 3, 4.0]])
    text = dense_tsv(w, ["r1", "r2"], ["a", "b", "c"])
    g = read_graph(write(tmp_path, "m.tsv", text))
    assert g.row_labels == ("r1", "r2") and g.col_labels == ("a", "b", "c")
    np.testing.assert_array_equal(g.weights, w)


def test_dense_ragged_row(tmp_path):
    with pytest.raises(ParseError, match=":3:"):
        read_graph(write(tmp_path, "m.tsv", "\ta\tb\nr1\t1\t2\nr2\t1\n"))


def test_edgelist_round_trip(tmp_path):
    g = WeightedBipartiteGraph.from_matrix([[0, 2.25], [7, 0]])
    back = read_graph(write(tmp_path, "e.csv", edgelist_csv(g)))
    for r in g.row_labels:
        for c in g.col_labels:
            w = g.weights[g.row_index(r), g.col_index(c)]
            if w:
                assert back.weights[back.row_index(r), back.col_index(c)] == w
    assert back.weights.sum() == g.weights.sum()


def test_read_matrix_allows_all_zero(tmp_path):
    rows, cols, m = read_matrix(write(tmp_path, "z.tsv", "\ta\tb\nr\t0\t0\n"))
    assert rows == ("r",) and cols == ("a", "b") and not m.any()


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_graph(tmp_path / "nope.csv")


def test_write_outputs_all_or_nothing(tmp_path):
    files = {"a.txt": "first", "b.txt": None}  # second write raises
    with pytest.raises(TypeError):
        write_outputs(tmp_path / "out", files)
    assert os.listdir(tmp_path / "out") == []

    written = write_outputs(tmp_path / "out", {"a.txt": "x", "b.txt": "y"})
    assert [p.name for p in written] == ["a.txt", "b.txt"]
    assert (tmp_path / "out" / "b.txt").read_text() == "y"
