"""Per-link expectations and p-values under the four null models.

=========  ================================  ===========================
model      link law                          p-value of ``w*``
=========  ================================  ===========================
biwcm_d    geometric, ``q = e^{-x}``         ``e^{-x w*}``
biwcm_c    exponential, rate ``x``           ``e^{-x w*}``
merca_d    geometric, mean ``b``             ``(b / (1 + b))^{w*}``
merca_c    exponential, mean ``b``           ``e^{-w* / b}``
=========  ================================  ===========================

Here ``x = theta_i + eta_a`` and ``b = s_i sigma_a / W`` is the Balassa
threshold.  P-values are upper tails including ``w*`` itself and are
computed as logarithms so that very large weights do not underflow.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .fileio import fmt
from .core import StrengthVectors, WeightedBipartiteGraph, strengths as _strengths
from .solvers import FittedModel, ModelKind


@dataclass(frozen=True)
class PValueMatrix:
    """Per-link p-values; ``log_values`` is authoritative, ``values`` its exponential."""

    log_values: np.ndarray
    model: ModelKind
    provenance: FittedModel

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def shape(self):
        return self.log_values.shape


def balassa_threshold(st: StrengthVectors, i=None, a=None):
    """``s_i sigma_a / W``; the full matrix when no indices are given."""
    if not st.total_weight > 0:
        raise ValueError("total weight must be positive")
    if i is None and a is None:
        return np.outer(st.row_strengths, st.col_strengths) / st.total_weight
    return float(st.row_strengths[i] * st.col_strengths[a] / st.total_weight)


def rca(g: WeightedBipartiteGraph, st: StrengthVectors | None, i: int, a: int) -> float:
    """Revealed comparative advantage ``w*_ia / (s_i sigma_a / W)``.

    A zero threshold gives 0 for a zero weight and ``inf`` otherwise.
    """
    st = st or _strengths(g)
    w = float(g.weights[i, a])
    b = balassa_threshold(st, i, a)
    if b == 0:
        return math.inf if w > 0 else 0.0
    return w / b


def rca_matrix(g: WeightedBipartiteGraph, st: StrengthVectors | None = None) -> np.ndarray:
    st = st or _strengths(g)
    b = balassa_threshold(st)
    out = np.zeros_like(b)
    pos = b > 0
    out[pos] = g.weights[pos] / b[pos]
    out[~pos & (g.weights > 0)] = np.inf
    return out


def rca_binarize(g: WeightedBipartiteGraph, st: StrengthVectors | None = None) -> np.ndarray:
    """Balassa binarization: 1 where ``RCA >= 1``."""
    return (rca_matrix(g, st) >= 1.0).astype(np.int8)


def _align(fm: FittedModel, g: WeightedBipartiteGraph):
    """Index arrays mapping ``g``'s rows/columns into ``fm`` (-1 if absent).

    Nodes missing from the model must be isolated in ``g``.
    """
    if fm.row_labels == g.row_labels and fm.col_labels == g.col_labels:
        return np.arange(len(g.row_labels)), np.arange(len(g.col_labels))
    rpos = {lab: k for k, lab in enumerate(fm.row_labels)}
    cpos = {lab: k for k, lab in enumerate(fm.col_labels)}
    ri = np.array([rpos.get(lab, -1) for lab in g.row_labels], dtype=int)
    ci = np.array([cpos.get(lab, -1) for lab in g.col_labels], dtype=int)
    if len(set(fm.row_labels) - set(g.row_labels)) or len(set(fm.col_labels) - set(g.col_labels)):
        raise ValueError("model has nodes that are not in the graph")
    w = g.weights
    if np.any(w[ri < 0, :] > 0) or np.any(w[:, ci < 0] > 0):
        raise ValueError("graph has non-isolated nodes the model was not fitted on")
    return ri, ci


def _model_strengths(fm: FittedModel):
    return fm.strengths.row_strengths, fm.strengths.col_strengths, fm.strengths.total_weight


def expected_weights(fm: FittedModel, g: WeightedBipartiteGraph | None = None) -> np.ndarray:
    """Matrix of ``<w_ia>``, expanded to ``g``'s labels (0 on isolated nodes)."""
    kind = fm.model
    if kind.closed_form:
        s, sigma, total = _model_strengths(fm)
        mu = np.outer(s, sigma) / total
    else:
        x = fm.pair_sums()
        mu = 1.0 / np.expm1(x) if kind is ModelKind.BIWCM_D else 1.0 / x
    if g is None:
        return mu
    ri, ci = _align(fm, g)
    out = np.zeros(g.shape)
    rk, ck = ri >= 0, ci >= 0
    out[np.ix_(rk, ck)] = mu[np.ix_(ri[rk], ci[ck])]
    return out


def expected_weight(fm: FittedModel, i: int, a: int) -> float:
    n, m = fm.shape
    if not (0 <= i < n and 0 <= a < m):
        raise IndexError(f"link ({i}, {a}) outside a {n}x{m} model")
    kind = fm.model
    if kind.closed_form:
        s, sigma, total = _model_strengths(fm)
        return float(s[i] * sigma[a] / total)
    x = float(fm.theta[i] + fm.eta[a])
    return 1.0 / math.expm1(x) if kind is ModelKind.BIWCM_D else 1.0 / x


def _log_survival_rate(fm: FittedModel) -> np.ndarray:
    """``-d ln p / d w*`` per link; 0 where the link has no expectation."""
    kind = fm.model
    if kind.closed_form:
        s, sigma, total = _model_strengths(fm)
        b = np.outer(s, sigma) / total
        rate = np.zeros_like(b)
        pos = b > 0
        if kind is ModelKind.MERCA_D:
            rate[pos] = np.log1p(1.0 / b[pos])
        else:
            rate[pos] = 1.0 / b[pos]
        return rate
    x = fm.pair_sums()
    if not np.all(x > 0):
        raise ValueError("pair sums theta_i + eta_a must be positive")
    return x


def _check_w(kind: ModelKind, w: np.ndarray) -> None:
    if np.any(w < 0):
        raise ValueError("observed weights must be nonnegative")
    if kind.discrete and np.any(w != np.round(w)):
        raise ValueError(f"{kind.value} requires integer weights")


def log_pvalue(fm: FittedModel, w_star: float, i: int, a: int) -> float:
    kind = fm.model
    w_star = float(w_star)
    _check_w(kind, np.array([w_star]))
    if w_star == 0:
        return 0.0
    if kind.closed_form:
        s, sigma, total = _model_strengths(fm)
        b = s[i] * sigma[a] / total
        if b == 0:
            return 0.0
        rate = math.log1p(1.0 / b) if kind is ModelKind.MERCA_D else 1.0 / b
    else:
        rate = float(fm.theta[i] + fm.eta[a])
        if not rate > 0:
            raise ValueError("pair sum theta_i + eta_a must be positive")
    return -rate * w_star


def pvalue(fm: FittedModel, w_star: float, i: int, a: int) -> float:
    """Probability of a weight at least ``w_star`` on link ``(i, a)``."""
    return math.exp(log_pvalue(fm, w_star, i, a))


def pvalue_matrix(fm: FittedModel, g: WeightedBipartiteGraph) -> PValueMatrix:
    """P-values of every observed weight of ``g``.

    Links touching a node the model was not fitted on (an isolated node) get
    p-value 1.
    """
    _check_w(fm.model, g.weights)
    ri, ci = _align(fm, g)
    rate = _log_survival_rate(fm)
    logp = np.zeros(g.shape)
    rk, ck = ri >= 0, ci >= 0
    sub = np.ix_(rk, ck)
    w = g.weights[sub]
    lp = -rate[np.ix_(ri[rk], ci[ck])] * w
    lp[w == 0] = 0.0
    logp[sub] = lp
    return PValueMatrix(logp, fm.model, fm)


@dataclass(frozen=True)
class SparseRegimeReport:
    relative_difference: np.ndarray
    max_relative_difference: float
    mean_relative_difference: float
    max_expected_weight: float


def sparse_regime_check(fm_discrete: FittedModel, st: StrengthVectors | None = None) -> SparseRegimeReport:
    """Compare fitted ``biwcm_d`` expected weights with the Balassa thresholds.

    The two coincide when every expected weight is small.
    """
    if fm_discrete.model is not ModelKind.BIWCM_D:
        raise ValueError("sparse regime check needs a fitted biwcm_d model")
    st = st or fm_discrete.strengths
    mu = expected_weights(fm_discrete)
    b = balassa_threshold(st)
    rel = np.abs(mu - b) / b
    return SparseRegimeReport(rel, float(rel.max()), float(rel.mean()), float(mu.max()))


def pvalues_to_csv(pm: PValueMatrix, g: WeightedBipartiteGraph, full: bool = False) -> str:
    """CSV ``row_label,col_label,weight,pvalue,log_pvalue``.

    Only nonzero-weight pairs unless ``full``.
    """
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["row_label", "col_label", "weight", "pvalue", "log_pvalue"])
    lp = pm.log_values
    for i, r in enumerate(g.row_labels):
        for a, c in enumerate(g.col_labels):
            w = g.weights[i, a]
            if w == 0 and not full:
                continue
            out.writerow([r, c, fmt(w), fmt(math.exp(lp[i, a])), fmt(lp[i, a])])
    return buf.getvalue()

