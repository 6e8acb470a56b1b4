"""Comparisons between validated matrices and the standard four-way analysis."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import WeightedBipartiteGraph, connectance
from .metrics import fitness_complexity, snodf, spearman
from .nullmodels import expected_weights, pvalue_matrix, rca_binarize
from .solvers import ModelKind, SolverConfig, fit
from .validation import ValidatedMatrix, alpha_validate, mu_validate


class LabelMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledMatrix:
    name: str
    matrix: np.ndarray
    row_labels: tuple
    col_labels: tuple

    @classmethod
    def from_validated(cls, name: str, vm: ValidatedMatrix) -> "LabeledMatrix":
        return cls(name, vm.matrix, tuple(vm.row_labels), tuple(vm.col_labels))


def align(matrices: list[LabeledMatrix]) -> list[LabeledMatrix]:
    """Reorder every matrix to the labels of the first one.

    Raises
    ------
    LabelMismatchError
        If the label sets differ; the message lists the differences.
    """
    ref = matrices[0]
    out = [ref]
    for other in matrices[1:]:
        problems = []
        for layer, a, b in (("row", ref.row_labels, other.row_labels), ("column", ref.col_labels, other.col_labels)):
            only_a = sorted(set(a) - set(b))
            only_b = sorted(set(b) - set(a))
            if only_a:
                problems.append(f"{layer} labels only in {ref.name}: {', '.join(map(str, only_a))}")
            if only_b:
                problems.append(f"{layer} labels only in {other.name}: {', '.join(map(str, only_b))}")
        if problems:
            raise LabelMismatchError("; ".join(problems))
        ri = {lab: k for k, lab in enumerate(other.row_labels)}
        ci = {lab: k for k, lab in enumerate(other.col_labels)}
        rows = [ri[lab] for lab in ref.row_labels]
        cols = [ci[lab] for lab in ref.col_labels]
        out.append(LabeledMatrix(other.name, other.matrix[np.ix_(rows, cols)], ref.row_labels, ref.col_labels))
    return out


def _safe_spearman(x, y):
    try:
        return spearman(x, y)
    except ValueError:
        return None


def _score_vectors(ranking, labels, layer):
    scores = ranking.fitness if layer == "rows" else ranking.complexity
    kept = ranking.row_labels if layer == "rows" else ranking.col_labels
    lookup = dict(zip(kept, scores))
    return {lab: lookup[lab] for lab in labels if lab in lookup}


def _correlate(a: dict, b: dict):
    common = [lab for lab in a if lab in b]
    if len(common) < 2:
        return None
    return _safe_spearman([a[k] for k in common], [b[k] for k in common])


def compare(matrices: list[LabeledMatrix], max_iter: int = 1000, tol: float = 1e-10) -> dict:
    """Link overlaps, connectance, sNODF and Fitness/Complexity Spearman grids.

    Fitness/Complexity are computed on each matrix (all-zero rows and
    columns dropped) and correlated over the labels kept in both.
    Correlations that are undefined (a constant score vector) are ``None``.
    """
    if len(matrices) < 2:
        raise ValueError("need at least two matrices to compare")
    names = [m.name for m in matrices]
    if len(set(names)) != len(names):
        raise ValueError("matrix names must be unique")
    mats = align(matrices)
    binary = {m.name: (np.asarray(m.matrix) > 0) for m in mats}
    rows, cols = mats[0].row_labels, mats[0].col_labels

    per_matrix = {}
    rankings = {}
    for m in mats:
        b = binary[m.name]
        entry = {
            "n_links": int(b.sum()),
            "connectance": connectance(b),
            "empty_rows": int((b.sum(axis=1) == 0).sum()),
            "empty_cols": int((b.sum(axis=0) == 0).sum()),
        }
        if b.shape[0] >= 2 and b.shape[1] >= 2:
            entry["snodf"] = snodf(b)
            entry["snodf_classic"] = snodf(b, variant="classic")
        if b.any():
            r = fitness_complexity(b, max_iter=max_iter, tol=tol, row_labels=rows, col_labels=cols)
            rankings[m.name] = r
            entry["fc_iterations"] = r.iterations
            entry["fc_converged"] = r.converged
        per_matrix[m.name] = entry

    pairs = []
    for a, b in combinations(names, 2):
        ba, bb = binary[a], binary[b]
        both = int((ba & bb).sum())
        na, nb = int(ba.sum()), int(bb.sum())
        union = int((ba | bb).sum())
        pair = {
            "a": a,
            "b": b,
            "links_a": na,
            "links_b": nb,
            "links_both": both,
            "fraction_of_a_in_b": both / na if na else None,
            "fraction_of_b_in_a": both / nb if nb else None,
            "jaccard": both / union if union else None,
        }
        if a in rankings and b in rankings:
            pair["spearman_fitness"] = _correlate(
                _score_vectors(rankings[a], rows, "rows"), _score_vectors(rankings[b], rows, "rows")
            )
            pair["spearman_complexity"] = _correlate(
                _score_vectors(rankings[a], cols, "cols"), _score_vectors(rankings[b], cols, "cols")
            )
        pairs.append(pair)

    def grid(key):
        table = {n: {n2: None for n2 in names} for n in names}
        for n in names:
            table[n][n] = 1.0 if n in rankings else None
        for p in pairs:
            table[p["a"]][p["b"]] = table[p["b"]][p["a"]] = p.get(key)
        return table

    return {
        "matrices": names,
        "shape": [len(rows), len(cols)],
        "per_matrix": per_matrix,
        "pairs": pairs,
        "spearman_fitness_grid": grid("spearman_fitness"),
        "spearman_complexity_grid": grid("spearman_complexity"),
    }


@dataclass(frozen=True)
class FilterResult:
    expected: np.ndarray
    one_minus_p: np.ndarray
    log_ratio: np.ndarray


def filter_signal(g: WeightedBipartiteGraph, fm) -> FilterResult:
    """``1 - p`` per link and ``ln((1 + w*) / (1 + <w>))``."""
    mu = expected_weights(fm, g)
    pm = pvalue_matrix(fm, g)
    one_minus_p = -np.expm1(pm.log_values)
    log_ratio = np.log1p(g.weights) - np.log1p(mu)
    return FilterResult(mu, one_minus_p, log_ratio)


def four_way(g: WeightedBipartiteGraph, alpha: float = 0.05, config: SolverConfig | None = None):
    """mu/alpha validation under merca_c and biwcm_c, keyed like ``mu-merca_c``.

    Also returns the fitted models and the plain RCA matrix.
    """
    models = {
        ModelKind.MERCA_C: fit(g, ModelKind.MERCA_C),
        ModelKind.BIWCM_C: fit(g, ModelKind.BIWCM_C, config),
    }
    validated = {}
    for kind, fm in models.items():
        validated[f"mu-{kind.value}"] = mu_validate(g, fm)
        validated[f"alpha-{kind.value}"] = alpha_validate(g, pvalue_matrix(fm, g), alpha)
    return validated, models, rca_binarize(g)


def pipeline_report(
    g: WeightedBipartiteGraph,
    alpha: float = 0.05,
    config: SolverConfig | None = None,
    max_iter: int = 1000,
    tol: float = 1e-10,
) -> tuple[dict, dict]:
    """Full comparison of the four validated matrices of ``g``.

    Returns the JSON-ready report and the validated matrices.
    """
    validated, models, rca = four_way(g, alpha, config)
    names = ["mu-merca_c", "alpha-merca_c", "mu-biwcm_c", "alpha-biwcm_c"]
    report = compare([LabeledMatrix.from_validated(n, validated[n]) for n in names], max_iter, tol)
    report["mu_merca_c_equals_rca"] = bool(np.array_equal(validated["mu-merca_c"].matrix, rca))
    report["validation"] = {n: validated[n].metadata() for n in names}
    fm = models[ModelKind.BIWCM_C]
    report["biwcm_c_fit"] = {
        "method": fm.diagnostics.method,
        "iterations": fm.diagnostics.iterations,
        "residual": fm.diagnostics.residual,
        "dropped_rows": len(g.row_labels) - len(fm.row_labels),
        "dropped_cols": len(g.col_labels) - len(fm.col_labels),
    }
    # Fitness/Complexity on the 1 - p matrix versus plain RCA
    sig = filter_signal(g, fm)
    fc_sig = fitness_complexity(sig.one_minus_p, max_iter, tol, g.row_labels, g.col_labels)
    fc_rca = fitness_complexity(rca, max_iter, tol, g.row_labels, g.col_labels)
    report["one_minus_p_vs_rca"] = {
        "spearman_fitness": _correlate(
            _score_vectors(fc_sig, g.row_labels, "rows"), _score_vectors(fc_rca, g.row_labels, "rows")
        ),
        "spearman_complexity": _correlate(
            _score_vectors(fc_sig, g.col_labels, "cols"), _score_vectors(fc_rca, g.col_labels, "cols")
        ),
    }
    return report, validated
