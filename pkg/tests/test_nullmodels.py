import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biwcm.core import Mode, StrengthVectors, WeightedBipartiteGraph, strengths
from biwcm.nullmodels import (
    balassa_threshold,
    expected_weight,
    expected_weights,
    log_pvalue,
    pvalue,
    pvalue_matrix,
    pvalues_to_csv,
    rca,
    rca_binarize,
    rca_matrix,
    sparse_regime_check,
)
from biwcm.solvers import Diagnostics, FittedModel, ModelKind, fit, merca, solve

from conftest import as_graph, random_counts

ST = StrengthVectors([10.0, 90.0], [20.0, 80.0], 100.0)


def biwcm_with_pair_sum(kind, x, shape=(1, 1)):
    n, m = shape
    stv = StrengthVectors(np.ones(n) * m, np.ones(m) * n, float(n * m))
    return FittedModel(
        kind, np.full(n, x / 2), np.full(m, x / 2), stv,
        tuple(f"r{i}" for i in range(n)), tuple(f"c{a}" for a in range(m)), Diagnostics("test"),
    )


def test_expected_weight_examples():
    assert expected_weight(biwcm_with_pair_sum(ModelKind.BIWCM_C, 2 / 3), 0, 0) == pytest.approx(1.5)
    assert expected_weight(biwcm_with_pair_sum(ModelKind.BIWCM_D, math.log(2)), 0, 0) == pytest.approx(1.0)
    for kind in (ModelKind.MERCA_D, ModelKind.MERCA_C):
        assert expected_weight(merca(ST, kind), 0, 0) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(IndexError):
        expected_weight(merca(ST, ModelKind.MERCA_C), 5, 0)


def test_balassa_threshold():
    assert balassa_threshold(ST, 0, 0) == 2.0
    assert balassa_threshold(StrengthVectors([0.0, 4.0], [2.0, 2.0], 4.0), 0, 0) == 0.0
    b = balassa_threshold(StrengthVectors([2.0, 2.0], [2.0, 2.0], 4.0))
    np.testing.assert_array_equal(b, np.ones((2, 2)))


def test_rca_examples():
    g = WeightedBipartiteGraph.from_matrix([[4, 6], [16, 74]])
    assert rca(g, ST, 0, 0) == pytest.approx(2.0)
    g0 = WeightedBipartiteGraph.from_matrix([[0, 10], [20, 70]])
    assert rca(g0, None, 0, 0) == 0.0
    assert rca_binarize(g0)[0, 0] == 0


def test_rca_matrix_matches_loop(rng):
    g = as_graph(random_counts(rng, 5, 7))
    st_ = strengths(g)
    m = rca_matrix(g)
    for i in range(5):
        for a in range(7):
            b = st_.row_strengths[i] * st_.col_strengths[a] / st_.total_weight
            w = g.weights[i, a]
            assert m[i, a] == pytest.approx(w / b if b else (0.0 if w == 0 else math.inf))


def test_closed_form_pvalues():
    assert pvalue(merca(ST, ModelKind.MERCA_D), 4, 0, 0) == pytest.approx(16 / 81, rel=1e-12)
    assert pvalue(merca(ST, ModelKind.MERCA_C), 4, 0, 0) == pytest.approx(math.exp(-2), rel=1e-12)
    assert pvalue(biwcm_with_pair_sum(ModelKind.BIWCM_C, 2 / 3), 3, 0, 0) == pytest.approx(math.exp(-2))


def test_geometric_pvalue_is_tail_sum():
    # P(w >= k) summed from the pmf (1-q) q^w
    x = 0.7
    fm = biwcm_with_pair_sum(ModelKind.BIWCM_D, x)
    q = math.exp(-x)
    tail = 1 - sum((1 - q) * q**w for w in range(5))
    assert pvalue(fm, 5, 0, 0) == pytest.approx(tail, rel=1e-12)


def test_merca_d_pvalue_is_geometric_tail():
    b = 2.0
    tail = 1 - sum((1 / (1 + b)) * (b / (1 + b)) ** w for w in range(4))
    assert pvalue(merca(ST, ModelKind.MERCA_D), 4, 0, 0) == pytest.approx(tail, rel=1e-12)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_pvalue_of_zero_is_one(rng, kind):
    g = as_graph(random_counts(rng, 4, 6))
    fm = fit(g, kind)
    assert pvalue(fm, 0, 0, 0) == 1.0
    pm = pvalue_matrix(fm, g)
    assert np.all(pm.values[g.weights == 0] == 1.0)


def test_pvalue_rejects_bad_weights():
    with pytest.raises(ValueError):
        pvalue(merca(ST, ModelKind.MERCA_C), -1, 0, 0)
    with pytest.raises(ValueError):
        pvalue(merca(ST, ModelKind.MERCA_D), 1.5, 0, 0)


@pytest.mark.parametrize("kind", list(ModelKind))
def test_pvalue_matrix_matches_scalar_loop(rng, kind):
    g = as_graph(random_counts(rng, 3, 3, density=0.8), Mode.DISCRETE)
    fm = fit(g, kind)
    pm = pvalue_matrix(fm, g)
    assert np.all((pm.values >= 0) & (pm.values <= 1))
    for i in range(3):
        for a in range(3):
            ri = fm.row_labels.index(g.row_labels[i]) if g.row_labels[i] in fm.row_labels else None
            ci = fm.col_labels.index(g.col_labels[a]) if g.col_labels[a] in fm.col_labels else None
            if ri is None or ci is None:
                assert pm.values[i, a] == 1.0
            else:
                assert pm.values[i, a] == pytest.approx(pvalue(fm, g.weights[i, a], ri, ci), rel=1e-14)


def test_huge_weights_keep_finite_log_pvalue():
    fm = merca(ST, ModelKind.MERCA_C)
    lp = log_pvalue(fm, 1e6, 0, 0)
    assert lp == pytest.approx(-5e5) and pvalue(fm, 1e6, 0, 0) == 0.0


def test_isolated_nodes_get_zero_expectation_and_unit_pvalue():
    g = WeightedBipartiteGraph.from_matrix([[3, 0, 1], [0, 0, 0], [2, 0, 5]])
    fm = fit(g, ModelKind.BIWCM_C)
    mu = expected_weights(fm, g)
    assert mu[1].sum() == 0 and mu[:, 1].sum() == 0
    np.testing.assert_allclose(mu.sum(axis=1)[[0, 2]], [4, 7], rtol=1e-8)
    assert np.all(pvalue_matrix(fm, g).values[1] == 1)


def test_merca_rows_sum_to_strengths(rng):
    g = as_graph(random_counts(rng, 6, 9))
    mu = expected_weights(merca(g, ModelKind.MERCA_C))
    st_ = strengths(g)
    np.testing.assert_allclose(mu.sum(axis=1), st_.row_strengths, rtol=1e-12)
    np.testing.assert_allclose(mu.sum(axis=0), st_.col_strengths, rtol=1e-12)


def sparse_strengths(rng, n=150):
    s = rng.integers(1, 4, n).astype(float)
    total = s.sum()
    # columns share the same total, each getting 1 or 2 units
    m = int(0.7 * total)
    sigma = np.ones(m)
    extra = rng.choice(m, int(total) - m, replace=False)
    sigma[extra] += 1
    return StrengthVectors(s, sigma, total)


def test_sparse_regime_close_to_balassa():
    stv = sparse_strengths(np.random.default_rng(3))
    fm = solve(stv, ModelKind.BIWCM_D)
    report = sparse_regime_check(fm)
    assert report.max_expected_weight <= 0.05
    assert report.max_relative_difference <= 0.05


def test_pvalues_csv_lists_links():
    g = WeightedBipartiteGraph.from_matrix([[4, 0], [16, 80]], ["a", "b"], ["x", "y"])
    pm = pvalue_matrix(merca(g, ModelKind.MERCA_C), g)
    lines = pvalues_to_csv(pm, g).splitlines()
    assert lines[0] == "row_label,col_label,weight,pvalue,log_pvalue"
    assert len(lines) == 4
    assert len(pvalues_to_csv(pm, g, full=True).splitlines()) == 5


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 7), m=st.integers(1, 7))
def test_pvalues_monotone_in_weight(seed, n, m):
    g = as_graph(random_counts(np.random.default_rng(seed), n, m, density=0.7, high=20))
    for kind in (ModelKind.MERCA_C, ModelKind.MERCA_D):
        fm = merca(g, kind)
        for i in range(n):
            for a in range(m):
                if fm.strengths.row_strengths[i] and fm.strengths.col_strengths[a]:
                    assert pvalue(fm, 3, i, a) <= pvalue(fm, 2, i, a) <= 1.0
