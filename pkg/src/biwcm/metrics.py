"""Structure metrics of (validated) bipartite matrices."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .fileio import fmt


@dataclass
class RankingResult:
    """Fitness of rows and Complexity of columns.

    Scores are over the kept rows/columns, in their original order; the
    all-zero ones removed before iterating are listed in ``dropped_*``.
    """

    fitness: np.ndarray
    complexity: np.ndarray
    row_labels: tuple
    col_labels: tuple
    iterations: int
    converged: bool
    max_relative_change: float
    dropped_rows: list = field(default_factory=list)
    dropped_cols: list = field(default_factory=list)
    history: list = field(default_factory=list, repr=False)

    def row_ranks(self) -> np.ndarray:
        return _ranks_desc(self.fitness)

    def col_ranks(self) -> np.ndarray:
        return _ranks_desc(self.complexity)

    def ranking_csv(self, layer: str) -> str:
        if layer == "rows":
            labels, scores, ranks = self.row_labels, self.fitness, self.row_ranks()
        elif layer == "cols":
            labels, scores, ranks = self.col_labels, self.complexity, self.col_ranks()
        else:
            raise ValueError(f"unknown layer {layer!r}")
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["label", "score", "rank"])
        for k in np.argsort(ranks, kind="stable"):
            out.writerow([labels[k], fmt(scores[k]), int(ranks[k])])
        return buf.getvalue()

    def diagnostics_json(self) -> str:
        return json.dumps(
            {
                "iterations": self.iterations,
                "converged": self.converged,
                "max_relative_change": self.max_relative_change,
                "dropped_rows": list(self.dropped_rows),
                "dropped_cols": list(self.dropped_cols),
                "initial_condition": "all_ones",
            },
            indent=1,
        )


def _ranks_desc(scores: np.ndarray) -> np.ndarray:
    """1 = highest score; ties keep the input order."""
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=int)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def fitness_complexity(
    m,
    max_iter: int = 1000,
    tol: float = 1e-10,
    row_labels=None,
    col_labels=None,
    keep_history: bool = False,
) -> RankingResult:
    """Fitness-Complexity iteration on a nonnegative matrix.

    Starting from all ones, each step computes

        F~_c = sum_p M_cp Q_p
        Q~_p = 1 / sum_c M_cp / F_c

    from the previous ``F`` and ``Q`` and divides both by their means.  It
    stops when the largest relative change of any score is at most ``tol``
    or after ``max_iter`` steps.  On strongly nested matrices some scores
    drift to zero and the iteration does not converge; that is reported,
    not raised.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("expected a matrix")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite and nonnegative")
    n, k = m.shape
    row_labels = tuple(row_labels) if row_labels is not None else tuple(range(n))
    col_labels = tuple(col_labels) if col_labels is not None else tuple(range(k))
    keep_r = m.sum(axis=1) > 0
    keep_c = m.sum(axis=0) > 0
    dropped_rows = [lab for lab, keep in zip(row_labels, keep_r) if not keep]
    dropped_cols = [lab for lab, keep in zip(col_labels, keep_c) if not keep]
    m = m[np.ix_(keep_r, keep_c)]
    if m.size == 0:
        raise ValueError("matrix is empty after dropping all-zero rows and columns")

    fit = np.ones(m.shape[0])
    comp = np.ones(m.shape[1])
    history = []
    change = np.inf
    converged = False
    it = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        while it < max_iter:
            it += 1
            f_new = m @ comp
            q_new = 1.0 / _inverse_sum(m, fit)
            f_new = f_new / f_new.mean()
            q_new = q_new / q_new.mean()
            if not (np.all(np.isfinite(f_new)) and np.all(np.isfinite(q_new))):
                break
            change = max(_rel_change(f_new, fit), _rel_change(q_new, comp))
            fit, comp = f_new, q_new
            if keep_history:
                history.append((fit.copy(), comp.copy()))
            if change <= tol:
                converged = True
                break
    return RankingResult(
        fitness=fit,
        complexity=comp,
        row_labels=tuple(lab for lab, keep in zip(row_labels, keep_r) if keep),
        col_labels=tuple(lab for lab, keep in zip(col_labels, keep_c) if keep),
        iterations=it,
        converged=converged,
        max_relative_change=float(change),
        dropped_rows=dropped_rows,
        dropped_cols=dropped_cols,
        history=history,
    )


def _inverse_sum(m: np.ndarray, fit: np.ndarray) -> np.ndarray:
    """``sum_c M_cp / F_c``, infinite where a zero-fitness row exports ``p``."""
    zero = fit == 0
    inv = 1.0 / np.where(zero, 1.0, fit)
    inv[zero] = 0.0
    out = m.T @ inv
    if zero.any():
        out[m[zero].sum(axis=0) > 0] = np.inf
    return out


def _rel_change(new: np.ndarray, old: np.ndarray) -> float:
    diff = np.abs(new - old)
    scale = np.abs(old)
    rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), np.where(diff > 0, np.inf, 0.0))
    return float(rel.max())


def _layer_overlap(b: np.ndarray, stable: bool) -> tuple[float, int]:
    """Sum of pair contributions over the rows of ``b`` and the number of pairs.

    Pairs with an empty node are skipped and not counted.
    """
    deg = b.sum(axis=1)
    live = deg > 0
    b = b[live]
    deg = deg[live]
    n = len(deg)
    if n < 2:
        return 0.0, 0
    overlap = b @ b.T
    iu, ju = np.triu_indices(n, 1)
    k_min = np.minimum(deg[iu], deg[ju])
    contrib = overlap[iu, ju] / k_min
    if not stable:
        contrib = np.where(deg[iu] == deg[ju], 0.0, contrib)
    return float(contrib.sum()), len(iu)


def snodf(m, variant: str = "stable") -> float:
    """Nestedness of a binary matrix in ``[0, 1]``.

    For every pair of rows (then of columns) with degrees ``k_i >= k_j > 0``
    the pair scores ``|N_i & N_j| / k_j``.  The ``stable`` variant also
    scores equal-degree pairs; ``classic`` NODF scores them 0.  The result
    is the mean score over all such pairs of both layers.
    """
    if variant not in ("stable", "classic"):
        raise ValueError(f"unknown sNODF variant {variant!r}")
    b = (np.asarray(m) > 0).astype(float)
    if b.ndim != 2 or b.shape[0] < 2 or b.shape[1] < 2:
        raise ValueError("nestedness needs at least 2 rows and 2 columns")
    stable = variant == "stable"
    row_sum, row_pairs = _layer_overlap(b, stable)
    col_sum, col_pairs = _layer_overlap(b.T, stable)
    pairs = row_pairs + col_pairs
    if pairs == 0:
        return 0.0
    return (row_sum + col_sum) / pairs


def spearman(x, y) -> float:
    """Spearman rank correlation; tied values share their average rank."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two vectors of equal length")
    if len(x) < 2:
        raise ValueError("spearman needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("spearman correlation is undefined for a constant vector")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.clip(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)), -1.0, 1.0))


def swap_randomize(m, n_swaps: int | None = None, seed: int = 0) -> np.ndarray:
    """Shuffle a binary matrix keeping every row and column degree.

    Repeatedly picks two links ``(i, a)``, ``(j, b)`` and rewires them to
    ``(i, b)``, ``(j, a)`` when both of those are empty.
    """
    b = (np.asarray(m) > 0).astype(np.int8).copy()
    rng = np.random.default_rng(seed)
    links = np.argwhere(b)
    if len(links) < 2:
        return b
    n_swaps = 10 * len(links) if n_swaps is None else n_swaps
    for _ in range(n_swaps):
        p, q = rng.choice(len(links), size=2, replace=False)
        (i, a), (j, c) = links[p], links[q]
        if i == j or a == c or b[i, c] or b[j, a]:
            continue
        b[i, a] = b[j, c] = 0
        b[i, c] = b[j, a] = 1
        links[p] = (i, c)
        links[q] = (j, a)
    return b
