"""Binarising weighted graphs against a null model.

Two procedures:

* ``mu``: keep a link when its weight is at least the expected one;
* ``alpha``: keep a link when its p-value survives a Benjamini-Hochberg
  false discovery rate correction at level ``alpha``.

The FDR correction counts every cell of the matrix as one test, zero-weight
cells included (their p-value is 1 so they are never discoveries).
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import WeightedBipartiteGraph, connectance
from .nullmodels import PValueMatrix, expected_weights, pvalue_matrix
from .solvers import FittedModel, ModelKind


class Procedure(str, enum.Enum):
    MU = "mu"
    ALPHA = "alpha"


@dataclass(frozen=True)
class ValidatedMatrix:
    matrix: np.ndarray
    procedure: Procedure
    model: ModelKind
    row_labels: tuple
    col_labels: tuple
    alpha_level: Optional[float] = None
    fdr_threshold: Optional[float] = None
    n_tests: Optional[int] = None

    @property
    def n_validated(self) -> int:
        return int(self.matrix.sum())

    def metadata(self) -> dict:
        return {
            "procedure": self.procedure.value,
            "model": self.model.value,
            "alpha": self.alpha_level,
            "fdr_threshold": self.fdr_threshold,
            "n_tests": self.n_tests,
            "n_tests_counts": "all_cells" if self.n_tests is not None else None,
            "n_validated": self.n_validated,
            "connectance": connectance(self.matrix),
        }

    def edgelist_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["row_label", "col_label"])
        for i, a in zip(*np.nonzero(self.matrix)):
            out.writerow([self.row_labels[i], self.col_labels[a]])
        return buf.getvalue()

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), indent=1, sort_keys=True)


def _check_dims(fm_or_pm_shape, g: WeightedBipartiteGraph):
    if tuple(fm_or_pm_shape) != g.shape:
        raise ValueError(f"dimension mismatch: {tuple(fm_or_pm_shape)} vs graph {g.shape}")


def mu_validate(g: WeightedBipartiteGraph, fm: FittedModel) -> ValidatedMatrix:
    """Keep links with ``w* >= <w>``; links with no expectation are dropped."""
    mu = expected_weights(fm, g)
    m = ((g.weights >= mu) & (mu > 0)).astype(np.int8)
    return ValidatedMatrix(m, Procedure.MU, fm.model, g.row_labels, g.col_labels)


def _fdr_from_log(log_p: np.ndarray, alpha: float) -> tuple[float, int, np.ndarray]:
    """Benjamini-Hochberg on log p-values.

    Returns the linear threshold, the number of discoveries and the flat
    sort order (ties broken by position, i.e. row then column).
    """
    n = log_p.size
    if n == 0:
        raise ValueError("no p-values to correct")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if np.any(log_p > 0) or np.any(np.isnan(log_p)):
        raise ValueError("p-values must lie in [0, 1]")
    order = np.argsort(log_p, kind="stable")
    ranks = np.arange(1, n + 1)
    ok = log_p[order] <= np.log(ranks * alpha / n)
    k = int(ranks[ok].max()) if ok.any() else 0
    return k * alpha / n, k, order


def fdr_threshold(pvalues, alpha: float = 0.05) -> tuple[float, int]:
    """Benjamini-Hochberg threshold ``k alpha / n`` and the number ``k`` of discoveries.

    ``k`` is the largest rank whose sorted p-value satisfies
    ``p_(k) <= k alpha / n``; ``(0.0, 0)`` if there is none.
    """
    p = np.asarray(pvalues, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("no p-values to correct")
    if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    n = p.size
    ranks = np.arange(1, n + 1)
    ok = np.sort(p) <= ranks * alpha / n
    k = int(ranks[ok].max()) if ok.any() else 0
    return k * alpha / n, k


def alpha_validate(g: WeightedBipartiteGraph, pm: PValueMatrix, alpha: float = 0.05) -> ValidatedMatrix:
    _check_dims(pm.shape, g)
    lp = pm.log_values.ravel()
    thr, k, order = _fdr_from_log(lp, alpha)
    m = np.zeros(lp.size, dtype=np.int8)
    # the first k in sorted order are exactly those with log p <= log thr
    m[order[:k]] = 1
    m = m.reshape(pm.shape)
    return ValidatedMatrix(
        m, Procedure.ALPHA, pm.model, g.row_labels, g.col_labels,
        alpha_level=float(alpha), fdr_threshold=float(thr), n_tests=int(lp.size),
    )


def validate(g: WeightedBipartiteGraph, fm: FittedModel, procedure, alpha: float = 0.05) -> ValidatedMatrix:
    procedure = Procedure(procedure)
    if procedure is Procedure.MU:
        return mu_validate(g, fm)
    return alpha_validate(g, pvalue_matrix(fm, g), alpha)
