"""Weighted bipartite graphs and their marginals.

A graph is a dense ``N_top x N_bot`` matrix of nonnegative weights with a
label per row (e.g. countries) and per column (e.g. products).  Weights are
either discrete (nonnegative integers, multi-edges) or continuous.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised when a graph cannot be built from the given data."""


class Mode(str, enum.Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


def _check_labels(labels: Sequence[str], layer: str) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    seen = set()
    for lab in labels:
        if lab in seen:
            raise GraphError(f"duplicate {layer} label {lab!r}")
        seen.add(lab)
    return labels


def _check_weights(weights: np.ndarray, mode: Mode, rows, cols) -> None:
    if not np.all(np.isfinite(weights)):
        raise GraphError("weights must be finite")
    neg = np.argwhere(weights < 0)
    if neg.size:
        i, a = neg[0]
        raise GraphError(f"negative weight {weights[i, a]!r} at ({rows[i]}, {cols[a]})")
    if mode is Mode.DISCRETE:
        frac = np.argwhere(weights != np.round(weights))
        if frac.size:
            i, a = frac[0]
            raise GraphError(
                f"non-integer weight {weights[i, a]!r} at ({rows[i]}, {cols[a]}) in discrete mode"
            )


@dataclass(frozen=True)
class WeightedBipartiteGraph:
    """Labeled bipartite graph with a dense weight matrix.

    The weight matrix is copied and made read-only on construction.
    """

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    weights: np.ndarray
    mode: Mode = Mode.CONTINUOUS
    _row_index: dict = field(init=False, repr=False, compare=False)
    _col_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mode = Mode(self.mode)
        rows = _check_labels(self.row_labels, "row")
        cols = _check_labels(self.col_labels, "column")
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape != (len(rows), len(cols)):
            raise GraphError(
                f"weight matrix has shape {w.shape}, expected ({len(rows)}, {len(cols)})"
            )
        _check_weights(w, mode, rows, cols)
        if not np.any(w > 0):
            raise GraphError("graph has no strictly positive weight")
        w.setflags(write=False)
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_row_index", {lab: k for k, lab in enumerate(rows)})
        object.__setattr__(self, "_col_index", {lab: k for k, lab in enumerate(cols)})

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def row_index(self, label: str) -> int:
        return self._row_index[label]

    def col_index(self, label: str) -> int:
        return self._col_index[label]

    @classmethod
    def from_matrix(cls, weights, row_labels=None, col_labels=None, mode=Mode.CONTINUOUS):
        """Build a graph from a matrix, generating ``r0, r1, ...`` / ``c0, ...`` labels if omitted."""
        w = np.asarray(weights, dtype=float)
        if w.ndim != 2:
            raise GraphError("weight matrix must be two-dimensional")
        if row_labels is None:
            row_labels = [f"r{i}" for i in range(w.shape[0])]
        if col_labels is None:
            col_labels = [f"c{a}" for a in range(w.shape[1])]
        return cls(tuple(row_labels), tuple(col_labels), w, Mode(mode))


@dataclass(frozen=True)
class StrengthVectors:
    """Row strengths ``s``, column strengths ``sigma`` and total weight ``W``."""

    row_strengths: np.ndarray
    col_strengths: np.ndarray
    total_weight: float

    def __post_init__(self):
        s = np.array(self.row_strengths, dtype=float)
        sigma = np.array(self.col_strengths, dtype=float)
        if np.any(s < 0) or np.any(sigma < 0):
            raise ValueError("strengths must be nonnegative")
        s.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "row_strengths", s)
        object.__setattr__(self, "col_strengths", sigma)
        object.__setattr__(self, "total_weight", float(self.total_weight))

    @classmethod
    def from_marginals(cls, row_strengths, col_strengths) -> "StrengthVectors":
        """Strengths given directly; the total is taken from the rows."""
        s = np.asarray(row_strengths, dtype=float)
        sigma = np.asarray(col_strengths, dtype=float)
        total = float(s.sum())
        if not np.isclose(total, sigma.sum(), rtol=1e-9, atol=0.0):
            raise ValueError(f"row total {total} and column total {sigma.sum()} disagree")
        return cls(s, sigma, total)


def build_graph(
    rows: Sequence[str],
    cols: Sequence[str],
    entries: Iterable[tuple[str, str, float]],
    mode: Mode | str = Mode.CONTINUOUS,
) -> WeightedBipartiteGraph:
    """Build a graph from labeled ``(row, col, weight)`` triples.

    Duplicate pairs are summed and pairs that never appear are zero.

    Raises
    ------
    GraphError
        On an unknown label, a negative weight, or a non-integer weight in
        discrete mode.
    """
    mode = Mode(mode)
    rows = _check_labels(rows, "row")
    cols = _check_labels(cols, "column")
    ri = {lab: k for k, lab in enumerate(rows)}
    ci = {lab: k for k, lab in enumerate(cols)}
    w = np.zeros((len(rows), len(cols)))
    for r, c, value in entries:
        r, c = str(r), str(c)
        if r not in ri:
            raise GraphError(f"unknown row label {r!r}")
        if c not in ci:
            raise GraphError(f"unknown column label {c!r}")
        value = float(value)
        if value < 0:
            raise GraphError(f"negative weight {value!r} at ({r}, {c})")
        if mode is Mode.DISCRETE and value != round(value):
            raise GraphError(f"non-integer weight {value!r} at ({r}, {c}) in discrete mode")
        w[ri[r], ci[c]] += value
    return WeightedBipartiteGraph(rows, cols, w, mode)


def strengths(g: WeightedBipartiteGraph) -> StrengthVectors:
    s = g.weights.sum(axis=1)
    sigma = g.weights.sum(axis=0)
    if g.mode is Mode.DISCRETE:
        # integer sums below 2**53 are exact in float64
        total = float(s.sum())
    else:
        total = float(np.sum(g.weights))
    return StrengthVectors(s, sigma, total)


def drop_isolated(
    g: WeightedBipartiteGraph,
) -> tuple[WeightedBipartiteGraph, list[str], list[str]]:
    """Remove zero-strength rows and columns.

    Returns the reduced graph and the dropped row and column labels.
    """
    keep_r = g.weights.sum(axis=1) > 0
    keep_c = g.weights.sum(axis=0) > 0
    dropped_rows = [lab for lab, k in zip(g.row_labels, keep_r) if not k]
    dropped_cols = [lab for lab, k in zip(g.col_labels, keep_c) if not k]
    if not dropped_rows and not dropped_cols:
        return g, [], []
    reduced = WeightedBipartiteGraph(
        tuple(lab for lab, k in zip(g.row_labels, keep_r) if k),
        tuple(lab for lab, k in zip(g.col_labels, keep_c) if k),
        g.weights[np.ix_(keep_r, keep_c)],
        g.mode,
    )
    return reduced, dropped_rows, dropped_cols


def connectance(m) -> float:
    """Fraction of nonzero cells of a binary matrix."""
    m = np.asarray(m)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("connectance of an empty matrix is undefined")
    return float(np.count_nonzero(m)) / m.size
