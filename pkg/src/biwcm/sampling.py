"""Drawing graphs from a fitted ensemble.

Each link is drawn independently from its law: geometric (support 0, 1, 2,
...) for the discrete models, exponential for the continuous ones.  Links
touching a node with zero strength are always 0.

Random streams: sample ``k`` of seed ``s`` uses a Philox generator keyed by
``SeedSequence(s, spawn_key=(k,))`` and consumes one uniform per cell in
row-major order, so the output depends on nothing but ``(s, k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Mode, WeightedBipartiteGraph
from .nullmodels import _log_survival_rate
from .solvers import FittedModel


@dataclass(frozen=True)
class EnsembleSample:
    weights: np.ndarray
    seed: int
    index: int
    model: FittedModel

    def to_graph(self) -> WeightedBipartiteGraph:
        mode = Mode.DISCRETE if self.model.model.discrete else Mode.CONTINUOUS
        return WeightedBipartiteGraph(self.model.row_labels, self.model.col_labels, self.weights, mode)


def _generator(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _rates(fm: FittedModel) -> np.ndarray:
    # exponential rate (continuous) or -ln q with q the geometric ratio (discrete)
    rate = _log_survival_rate(fm)
    if fm.theta is not None and not np.all(rate > 0):
        raise ValueError("pair sums theta_i + eta_a must be positive")
    return rate


def _draw(fm: FittedModel, rate: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # 1 - U lies in (0, 1], so the log is finite
    e = -np.log1p(-rng.random(rate.shape))
    live = rate > 0
    w = np.zeros(rate.shape)
    w[live] = e[live] / rate[live]
    if fm.model.discrete:
        # floor(ln U / ln q) inverts the geometric CDF
        w = np.floor(w)
    return w


def sample(fm: FittedModel, seed: int, index: int = 0) -> EnsembleSample:
    rate = _rates(fm)
    return EnsembleSample(_draw(fm, rate, _generator(seed, index)), int(seed), int(index), fm)


@dataclass(frozen=True)
class EnsembleStats:
    n_samples: int
    mean: np.ndarray
    var: np.ndarray
    row_strength_mean: np.ndarray
    col_strength_mean: np.ndarray
    row_strength_var: np.ndarray
    col_strength_var: np.ndarray


class _Welford:
    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def push(self, x):
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def var(self):
        if self.n < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.n - 1)


def ensemble_stats(fm: FittedModel, n_samples: int, seed: int) -> EnsembleStats:
    """Streaming per-link and per-node moments over samples ``0 .. n_samples-1``.

    Variances are unbiased (``n - 1`` denominator) and zero for one sample.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rate = _rates(fm)
    links = _Welford(rate.shape)
    rows = _Welford(rate.shape[0])
    cols = _Welford(rate.shape[1])
    for k in range(n_samples):
        w = _draw(fm, rate, _generator(seed, k))
        links.push(w)
        rows.push(w.sum(axis=1))
        cols.push(w.sum(axis=0))
    return EnsembleStats(
        n_samples, links.mean, links.var(), rows.mean, cols.mean, rows.var(), cols.var()
    )
