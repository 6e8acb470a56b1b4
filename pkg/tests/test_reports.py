import math

import numpy as np
import pytest

from biwcm.core import WeightedBipartiteGraph
from biwcm.nullmodels import expected_weight, pvalue
from biwcm.reports import (
    LabeledMatrix,
    LabelMismatchError,
    align,
    compare,
    filter_signal,
    pipeline_report,
)
from biwcm.solvers import ModelKind, fit, merca

from conftest import as_graph, random_counts

ROWS = ("a", "b", "c")
COLS = ("x", "y", "z", "t")


def lm(name, m, rows=ROWS, cols=COLS):
    return LabeledMatrix(name, np.asarray(m), rows, cols)


A = [[1, 1, 1, 0], [1, 1, 0, 0], [1, 0, 0, 0]]


def test_identical_matrices():
    rep = compare([lm("p", A), lm("q", A)])
    pair = rep["pairs"][0]
    assert pair["links_both"] == 6 and pair["fraction_of_a_in_b"] == 1.0 and pair["jaccard"] == 1.0
    assert pair["spearman_fitness"] == pytest.approx(1.0)
    assert pair["spearman_complexity"] == pytest.approx(1.0)
    assert rep["spearman_fitness_grid"]["p"]["q"] == pair["spearman_fitness"]


def test_disjoint_matrices():
    b = 1 - np.array(A)
    pair = compare([lm("p", A), lm("q", b)])["pairs"][0]
    assert pair["links_both"] == 0 and pair["jaccard"] == 0.0


def test_hand_counted_overlap():
    # five links each, three shared: (a,x) (a,y) (b,x)
    p = [[1, 1, 0, 0], [1, 1, 0, 0], [1, 0, 0, 0]]
    q = [[1, 1, 1, 0], [1, 0, 0, 1], [0, 0, 0, 0]]
    pair = compare([lm("p", p), lm("q", q)])["pairs"][0]
    assert (pair["links_a"], pair["links_b"], pair["links_both"]) == (5, 5, 3)
    assert pair["fraction_of_a_in_b"] == pytest.approx(0.6)
    assert pair["jaccard"] == pytest.approx(3 / 7)


def test_per_matrix_entries():
    rep = compare([lm("p", A), lm("q", np.zeros((3, 4)))])
    p, q = rep["per_matrix"]["p"], rep["per_matrix"]["q"]
    assert p["n_links"] == 6 and p["connectance"] == 0.5 and p["empty_cols"] == 1
    assert q["n_links"] == 0 and "fc_iterations" not in q
    assert rep["pairs"][0].get("spearman_fitness") is None


def test_align_reorders_labels():
    m = np.arange(12).reshape(3, 4)
    flipped = lm("q", m[::-1, ::-1], ROWS[::-1], COLS[::-1])
    out = align([lm("p", m), flipped])
    np.testing.assert_array_equal(out[1].matrix, m)


def test_label_mismatch_lists_differences():
    with pytest.raises(LabelMismatchError, match="only in p: z.*only in q: w"):
        compare([lm("p", A), lm("q", A, cols=("x", "y", "w", "t"))])
    with pytest.raises(ValueError):
        compare([lm("p", A)])
    with pytest.raises(ValueError):
        compare([lm("p", A), lm("p", A)])


def test_filter_signal_composition(rng):
    w = random_counts(rng, 3, 3, density=0.7, high=20)
    g = as_graph(w)
    fm = fit(g, ModelKind.BIWCM_C)
    sig = filter_signal(g, fm)
    for i in range(3):
        for a in range(3):
            if w[i, a] == 0:
                assert sig.one_minus_p[i, a] == 0
                continue
            ri, ci = fm.row_labels.index(g.row_labels[i]), fm.col_labels.index(g.col_labels[a])
            mu = expected_weight(fm, ri, ci)
            assert sig.expected[i, a] == pytest.approx(mu, rel=1e-14)
            assert sig.one_minus_p[i, a] == pytest.approx(1 - pvalue(fm, w[i, a], ri, ci), rel=1e-12)
            assert sig.log_ratio[i, a] == pytest.approx(math.log((1 + w[i, a]) / (1 + mu)), rel=1e-12)


def test_filter_log_ratio_zero_at_expectation():
    g = WeightedBipartiteGraph.from_matrix([[2, 2], [2, 2]])
    sig = filter_signal(g, merca(g, ModelKind.MERCA_C))
    assert np.all(sig.log_ratio == 0)


def test_pipeline_report(rng):
    g = as_graph(random_counts(rng, 10, 16, density=0.5))
    rep, validated = pipeline_report(g)
    assert rep["matrices"] == ["mu-merca_c", "alpha-merca_c", "mu-biwcm_c", "alpha-biwcm_c"]
    assert rep["mu_merca_c_equals_rca"] is True
    assert set(validated) == set(rep["matrices"])
    for name in rep["matrices"]:
        assert rep["validation"][name]["n_validated"] == rep["per_matrix"][name]["n_links"]
        assert "snodf" in rep["per_matrix"][name]
    assert len(rep["pairs"]) == 6
    assert set(rep["one_minus_p_vs_rca"]) == {"spearman_fitness", "spearman_complexity"}
    assert rep["biwcm_c_fit"]["residual"] <= 1e-8
