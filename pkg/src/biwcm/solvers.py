"""Lagrange multipliers of the bipartite weighted configuration models.

Both models assign each link an independent weight whose law depends on the
pair sum ``x = theta_i + eta_alpha``:

* ``biwcm_d`` (discrete): geometric, ``P(w) = e^{-x w} (1 - e^{-x})``
  with mean ``1 / expm1(x)``;
* ``biwcm_c`` (continuous): exponential with rate ``x`` and mean ``1 / x``.

Multipliers are found by maximising the log-likelihood of the observed
strengths, i.e. by solving ``<s_i> = s_i*`` and ``<sigma_a> = sigma_a*``.
Three iterative schemes are available: the multiplicative/additive
fixed-point map, full Newton and diagonal quasi-Newton.

Only pair sums are identified: shifting every ``theta`` by ``c`` and every
``eta`` by ``-c`` changes nothing.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Mode, StrengthVectors, WeightedBipartiteGraph, drop_isolated, strengths as _strengths

logger = logging.getLogger(__name__)

_MAX_HALVINGS = 30
_ARMIJO = 1e-4


class ModelKind(str, enum.Enum):
    BIWCM_D = "biwcm_d"
    BIWCM_C = "biwcm_c"
    MERCA_D = "merca_d"
    MERCA_C = "merca_c"

    @property
    def discrete(self) -> bool:
        return self in (ModelKind.BIWCM_D, ModelKind.MERCA_D)

    @property
    def closed_form(self) -> bool:
        return self in (ModelKind.MERCA_D, ModelKind.MERCA_C)


class Method(str, enum.Enum):
    FIXED_POINT = "fixed_point"
    NEWTON = "newton"
    QUASI_NEWTON = "quasi_newton"


DEFAULT_METHOD = {ModelKind.BIWCM_D: Method.QUASI_NEWTON, ModelKind.BIWCM_C: Method.FIXED_POINT}


class DomainError(ValueError):
    """Some pair sum ``theta_i + eta_alpha`` is not strictly positive."""


class ConvergenceError(RuntimeError):
    """The solver hit ``max_iterations`` before reaching the tolerance.

    The best iterate seen is kept on the exception.
    """

    def __init__(self, message, theta, eta, residual, iterations):
        super().__init__(message)
        self.theta = theta
        self.eta = eta
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class SolverConfig:
    method: Optional[Method] = None  # None -> per-model default
    tolerance: float = 1e-8
    max_iterations: int = 5000
    seed_strategy: str = "strengths"
    reduce_degeneracy: bool = True
    record_trace: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.method is not None:
            object.__setattr__(self, "method", Method(self.method))
        if self.seed_strategy not in ("strengths", "uniform"):
            raise ValueError(f"unknown seed strategy {self.seed_strategy!r}")


@dataclass
class Diagnostics:
    method: str
    iterations: int = 0
    residual: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    hessian_fallback: bool = False
    loglik_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class FittedModel:
    """A solved null model.

    ``theta`` and ``eta`` are ``None`` for the closed-form MERCA models,
    whose link laws depend only on the strengths.
    """

    model: ModelKind
    theta: Optional[np.ndarray]
    eta: Optional[np.ndarray]
    strengths: StrengthVectors
    row_labels: tuple
    col_labels: tuple
    diagnostics: Diagnostics

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_labels), len(self.col_labels)

    def pair_sums(self) -> np.ndarray:
        if self.theta is None:
            raise ValueError(f"{self.model.value} has no Lagrange multipliers")
        return self.theta[:, None] + self.eta[None, :]

    def to_json(self) -> str:
        d = self.diagnostics
        payload = {
            "model": self.model.value,
            "theta": None if self.theta is None else [float(v) for v in self.theta],
            "eta": None if self.eta is None else [float(v) for v in self.eta],
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "residual": d.residual,
            "iterations": d.iterations,
            "method": d.method,
            "row_strengths": [float(v) for v in self.strengths.row_strengths],
            "col_strengths": [float(v) for v in self.strengths.col_strengths],
            "total_weight": self.strengths.total_weight,
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        d = json.loads(text)
        try:
            kind = ModelKind(d["model"])
            theta = None if d.get("theta") is None else np.asarray(d["theta"], dtype=float)
            eta = None if d.get("eta") is None else np.asarray(d["eta"], dtype=float)
            st = StrengthVectors(d["row_strengths"], d["col_strengths"], d["total_weight"])
            rows, cols = tuple(d["row_labels"]), tuple(d["col_labels"])
            diag = Diagnostics(
                method=d["method"],
                iterations=int(d["iterations"]),
                residual=float(d["residual"]),
                converged=True,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid model file: {exc}") from exc
        if (theta is None) != (eta is None) or (theta is None and not kind.closed_form):
            raise ValueError(f"invalid model file: {kind.value} needs theta and eta")
        if theta is not None and (len(theta) != len(rows) or len(eta) != len(cols)):
            raise ValueError("invalid model file: multiplier and label lengths differ")
        if len(st.row_strengths) != len(rows) or len(st.col_strengths) != len(cols):
            raise ValueError("invalid model file: strength and label lengths differ")
        return cls(kind, theta, eta, st, rows, cols, diag)


# ---------------------------------------------------------------------------
# per-link kernels, as functions of the pair sum x


def _check_domain(x: np.ndarray) -> None:
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise DomainError("pair sums theta_i + eta_alpha must be finite and > 0")


def _mean(kind: ModelKind, x: np.ndarray) -> np.ndarray:
    if kind is ModelKind.BIWCM_D:
        return 1.0 / np.expm1(x)
    return 1.0 / x


def _var(kind: ModelKind, x: np.ndarray) -> np.ndarray:
    if kind is ModelKind.BIWCM_D:
        m = 1.0 / np.expm1(x)
        return m * (1.0 + m)
    return 1.0 / (x * x)


def _log_norm(kind: ModelKind, x: np.ndarray) -> np.ndarray:
    if kind is ModelKind.BIWCM_D:
        return np.log(-np.expm1(-x))
    return np.log(x)


def _kind(model) -> ModelKind:
    kind = ModelKind(model)
    if kind.closed_form:
        raise ValueError(f"{kind.value} has no multipliers to fit")
    return kind


def _as_vectors(theta, eta, st: StrengthVectors):
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if theta.shape != st.row_strengths.shape or eta.shape != st.col_strengths.shape:
        raise ValueError("multiplier and strength vector lengths differ")
    return theta, eta


# ---------------------------------------------------------------------------
# likelihood, derivatives and single steps; the optional multiplicities let the
# solver work on the system where nodes of equal strength share one variable


def _loglik(kind, theta, eta, s, sigma, rm, cm):
    x = theta[:, None] + eta[None, :]
    _check_domain(x)
    return float(rm @ _log_norm(kind, x) @ cm - (rm * s) @ theta - (cm * sigma) @ eta)


def _loglik_change(kind, theta, eta, dt, de, s, sigma, rm, cm):
    """``L(theta+dt, eta+de) - L(theta, eta)`` without cancelling the totals.

    Near the optimum the change is far below the rounding error of ``L``
    itself, so each link term is differenced analytically.
    """
    x = theta[:, None] + eta[None, :]
    dx = dt[:, None] + de[None, :]
    if kind is ModelKind.BIWCM_D:
        # ln(1-e^{-(x+dx)}) - ln(1-e^{-x})
        link = np.log1p(np.exp(-x) * -np.expm1(-dx) / -np.expm1(-x))
    else:
        link = np.log1p(dx / x)
    return float(rm @ link @ cm - (rm * s) @ dt - (cm * sigma) @ de)


def _expected(kind, theta, eta, rm, cm):
    x = theta[:, None] + eta[None, :]
    _check_domain(x)
    mu = _mean(kind, x)
    return mu @ cm, rm @ mu


def log_likelihood(model, theta, eta, strengths: StrengthVectors) -> float:
    kind = _kind(model)
    theta, eta = _as_vectors(theta, eta, strengths)
    return _loglik(
        kind, theta, eta, strengths.row_strengths, strengths.col_strengths,
        np.ones_like(theta), np.ones_like(eta),
    )


def log_likelihood_biwcm_d(theta, eta, strengths: StrengthVectors) -> float:
    """``sum ln(1 - e^{-(theta_i+eta_a)}) - s . theta - sigma . eta``."""
    return log_likelihood(ModelKind.BIWCM_D, theta, eta, strengths)


def log_likelihood_biwcm_c(theta, eta, strengths: StrengthVectors) -> float:
    """``sum ln(theta_i + eta_a) - s . theta - sigma . eta``."""
    return log_likelihood(ModelKind.BIWCM_C, theta, eta, strengths)


def expected_strengths(model, theta, eta) -> tuple[np.ndarray, np.ndarray]:
    kind = _kind(model)
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return _expected(kind, theta, eta, np.ones_like(theta), np.ones_like(eta))


def gradient(model, theta, eta, strengths: StrengthVectors):
    """Gradient of the log-likelihood: ``(<s> - s*, <sigma> - sigma*)``."""
    kind = _kind(model)
    theta, eta = _as_vectors(theta, eta, strengths)
    es, esig = expected_strengths(kind, theta, eta)
    return es - strengths.row_strengths, esig - strengths.col_strengths


def _hessian(kind, theta, eta, rm, cm):
    n, m = len(theta), len(eta)
    x = theta[:, None] + eta[None, :]
    _check_domain(x)
    v = _var(kind, x) * rm[:, None] * cm[None, :]
    h = np.empty((n + m, n + m))
    h[:n, :n] = np.diag(-v.sum(axis=1))
    h[n:, n:] = np.diag(-v.sum(axis=0))
    h[:n, n:] = -v
    h[n:, :n] = -v.T
    return h


def hessian(model, theta, eta) -> np.ndarray:
    """Full ``(N_top + N_bot)``-square Hessian, ``theta`` block first.

    Every entry is minus a per-link variance (or a sum of them); the matrix
    is negative semidefinite with the gauge direction in its kernel.
    """
    kind = _kind(model)
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return _hessian(kind, theta, eta, np.ones_like(theta), np.ones_like(eta))


def _feasible(theta, eta) -> bool:
    x = theta[:, None] + eta[None, :]
    return bool(np.all(x > 0) and np.all(np.isfinite(x)))


def _damp(theta, eta, dt, de):
    """Halve the step until the iterate stays in the domain."""
    t = 1.0
    for _ in range(_MAX_HALVINGS + 1):
        nt, ne = theta + t * dt, eta + t * de
        if _feasible(nt, ne):
            return nt, ne, t
        t *= 0.5
    raise DomainError("step could not be damped back into the domain")


def _fixed_point_delta(kind, theta, eta, s, sigma, rm, cm):
    es, esig = _expected(kind, theta, eta, rm, cm)
    if kind is ModelKind.BIWCM_D:
        return np.log(es / s), np.log(esig / sigma)
    return theta * (es / s - 1.0), eta * (esig / sigma - 1.0)


def _fixed_point_sweep(kind, theta, eta, s, sigma, rm, cm):
    """Apply the fixed-point map to the rows, then to the columns.

    Updating both layers from the same iterate corrects a global excess of
    weight twice; for the discrete model that mode then flips sign forever.
    """
    if kind is ModelKind.BIWCM_D:
        es, vs = _layer_moments(kind, theta, eta, cm, axis=1)
        dt = np.log(es / s) * (es / vs)
    else:
        es, _ = _expected(kind, theta, eta, rm, cm)
        dt = theta * (es / s - 1.0)
    theta, eta, _ = _damp(theta, eta, dt, np.zeros_like(eta))
    if kind is ModelKind.BIWCM_D:
        esig, vsig = _layer_moments(kind, theta, eta, rm, axis=0)
        de = np.log(esig / sigma) * (esig / vsig)
    else:
        _, esig = _expected(kind, theta, eta, rm, cm)
        de = eta * (esig / sigma - 1.0)
    theta, eta, _ = _damp(theta, eta, np.zeros_like(theta), de)
    return theta, eta


def _layer_moments(kind, theta, eta, mult, axis):
    """Expected strength and strength variance of one layer."""
    x = theta[:, None] + eta[None, :]
    _check_domain(x)
    mean, var = _mean(kind, x), _var(kind, x)
    if axis == 1:
        return mean @ mult, var @ mult
    return mult @ mean, mult @ var


def fixed_point_step(model, theta, eta, strengths: StrengthVectors):
    """One step of the fixed-point map, both layers updated together.

    Discrete: ``theta_i <- theta_i + ln(<s_i>/s_i*)``.
    Continuous: ``theta_i <- theta_i * <s_i>/s_i*``.
    The ``eta`` update is symmetric.  Infeasible steps are halved.
    """
    kind = _kind(model)
    theta, eta = _as_vectors(theta, eta, strengths)
    dt, de = _fixed_point_delta(
        kind, theta, eta, strengths.row_strengths, strengths.col_strengths,
        np.ones_like(theta), np.ones_like(eta),
    )
    nt, ne, _ = _damp(theta, eta, dt, de)
    return nt, ne


def _newton_delta(kind, theta, eta, s, sigma, rm, cm, quasi):
    """Return ``(d_theta, d_eta, fell_back)``."""
    n = len(theta)
    es, esig = _expected(kind, theta, eta, rm, cm)
    g = np.concatenate([rm * (es - s), cm * (esig - sigma)])
    if not quasi:
        h = _hessian(kind, theta, eta, rm, cm)
        # pin the last eta to remove the gauge null direction
        try:
            d = np.zeros_like(g)
            d[:-1] = np.linalg.solve(h[:-1, :-1], -g[:-1])
            if np.all(np.isfinite(d)):
                return d[:n], d[n:], False
        except np.linalg.LinAlgError:
            pass
    x = theta[:, None] + eta[None, :]
    v = _var(kind, x) * rm[:, None] * cm[None, :]
    diag = np.concatenate([v.sum(axis=1), v.sum(axis=0)])
    d = g / diag  # -g / H_kk with H_kk = -diag
    return d[:n], d[n:], not quasi


def newton_step(model, theta, eta, strengths: StrengthVectors, quasi: bool = False):
    """One (quasi-)Newton step ``-H^{-1} grad``, damped to stay feasible.

    The quasi variant keeps only the Hessian diagonal.  A singular full
    Hessian falls back to the diagonal.
    """
    kind = _kind(model)
    theta, eta = _as_vectors(theta, eta, strengths)
    dt, de, _ = _newton_delta(
        kind, theta, eta, strengths.row_strengths, strengths.col_strengths,
        np.ones_like(theta), np.ones_like(eta), quasi,
    )
    nt, ne, _ = _damp(theta, eta, dt, de)
    return nt, ne


# ---------------------------------------------------------------------------
# solve


def initial_guess(model, st: StrengthVectors, strategy: str = "strengths"):
    """Starting multipliers; every pair sum is strictly positive."""
    kind = _kind(model)
    s, sigma, total = st.row_strengths, st.col_strengths, st.total_weight
    n, m = len(s), len(sigma)
    if strategy == "uniform":
        # symmetric solution for the average strength
        avg = total / (n * m)
        x0 = np.log1p(1.0 / avg) if kind is ModelKind.BIWCM_D else 1.0 / avg
        return np.full(n, x0 / 2), np.full(m, x0 / 2)
    if kind is ModelKind.BIWCM_C:
        return m / (2.0 * s), n / (2.0 * sigma)
    half_log_w = 0.5 * np.log(total)
    theta = -np.log(s) + half_log_w
    eta = -np.log(sigma) + half_log_w
    lowest = theta.min() + eta.min()
    if lowest <= 0:
        # smallest pair sum becomes ln 2, i.e. expected weight 1
        theta = theta + (np.log(2.0) - lowest)
    return theta, eta


def _residual(kind, theta, eta, s, sigma, rm, cm) -> float:
    es, esig = _expected(kind, theta, eta, rm, cm)
    return float(max(np.max(np.abs(es - s) / s), np.max(np.abs(esig - sigma) / sigma)))


def _group(values: np.ndarray, reduce: bool):
    if not reduce:
        return values, np.arange(len(values)), np.ones(len(values))
    uniq, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    return uniq, inverse, counts.astype(float)


def canonical_gauge(theta: np.ndarray, eta: np.ndarray):
    """Shift so that ``min(theta) == min(eta)``; pair sums are unchanged."""
    c = 0.5 * (eta.min() - theta.min())
    return theta + c, eta - c


def _line_search(kind, theta, eta, dt, de, s, sigma, rm, cm, slope):
    """Backtrack from the full step until feasible and Armijo-increasing.

    Returns the new iterate and the likelihood gain, or ``None``.
    """
    t = 1.0
    for _ in range(_MAX_HALVINGS + 1):
        nt, ne = theta + t * dt, eta + t * de
        if _feasible(nt, ne):
            gain = _loglik_change(kind, theta, eta, t * dt, t * de, s, sigma, rm, cm)
            if gain >= _ARMIJO * t * slope:
                return nt, ne, gain
        t *= 0.5
    return None


def solve(
    g: WeightedBipartiteGraph | StrengthVectors,
    model,
    config: SolverConfig | None = None,
    row_labels=None,
    col_labels=None,
) -> FittedModel:
    """Fit ``biwcm_d`` or ``biwcm_c`` to the strengths of ``g``.

    Convergence is declared when the largest relative error between the
    expected and observed strengths is at most ``config.tolerance``.

    Raises
    ------
    ValueError
        If a node has zero strength (use :func:`biwcm.core.drop_isolated`
        first) or the discrete model is asked to fit non-integer weights.
    ConvergenceError
        If ``max_iterations`` is reached first.
    """
    config = config or SolverConfig()
    kind = _kind(model)
    if isinstance(g, WeightedBipartiteGraph):
        if kind is ModelKind.BIWCM_D and g.mode is not Mode.DISCRETE:
            w = g.weights
            if np.any(w != np.round(w)):
                raise ValueError("biwcm_d requires integer weights")
        st = _strengths(g)
        row_labels, col_labels = g.row_labels, g.col_labels
    else:
        st = g
        n, m = len(st.row_strengths), len(st.col_strengths)
        row_labels = tuple(row_labels) if row_labels is not None else tuple(f"r{i}" for i in range(n))
        col_labels = tuple(col_labels) if col_labels is not None else tuple(f"c{a}" for a in range(m))
    if np.any(st.row_strengths <= 0) or np.any(st.col_strengths <= 0):
        raise ValueError("zero-strength nodes must be dropped before fitting")

    method = config.method or DEFAULT_METHOD[kind]
    diag = Diagnostics(method=method.value)
    start = time.perf_counter()

    s, r_inv, rm = _group(st.row_strengths, config.reduce_degeneracy)
    sigma, c_inv, cm = _group(st.col_strengths, config.reduce_degeneracy)
    t0, e0 = initial_guess(kind, StrengthVectors(s, sigma, st.total_weight), config.seed_strategy)
    theta, eta = t0, e0

    res = _residual(kind, theta, eta, s, sigma, rm, cm)
    best = (res, theta, eta)
    f = _loglik(kind, theta, eta, s, sigma, rm, cm)
    if config.record_trace:
        diag.loglik_trace.append(f)
    it = 0
    while res > config.tolerance and it < config.max_iterations:
        it += 1
        if method is Method.FIXED_POINT:
            old_t, old_e = theta, eta
            theta, eta = _fixed_point_sweep(kind, theta, eta, s, sigma, rm, cm)
            f += _loglik_change(kind, old_t, old_e, theta - old_t, eta - old_e, s, sigma, rm, cm)
        else:
            dt, de, fell_back = _newton_delta(
                kind, theta, eta, s, sigma, rm, cm, method is Method.QUASI_NEWTON
            )
            diag.hessian_fallback |= fell_back
            es, esig = _expected(kind, theta, eta, rm, cm)
            slope = float((rm * (es - s)) @ dt + (cm * (esig - sigma)) @ de)
            step = _line_search(kind, theta, eta, dt, de, s, sigma, rm, cm, slope)
            if step is None:
                # no ascent left at double precision
                break
            theta, eta, gain = step
            f += gain
        if kind is ModelKind.BIWCM_D or method is not Method.FIXED_POINT:
            # tiny pair sums lose precision if theta and eta grow apart;
            # the continuous fixed-point map needs positive multipliers instead
            theta, eta = canonical_gauge(theta, eta)
        if config.record_trace:
            diag.loglik_trace.append(f)
        res = _residual(kind, theta, eta, s, sigma, rm, cm)
        if res < best[0]:
            best = (res, theta, eta)

    res, theta, eta = best
    theta, eta = canonical_gauge(theta[r_inv], eta[c_inv])
    diag.iterations = it
    diag.residual = res
    diag.wall_time = time.perf_counter() - start
    diag.converged = res <= config.tolerance
    if not diag.converged:
        raise ConvergenceError(
            f"{kind.value} {method.value} stopped after {it} iterations "
            f"with residual {res:.3e} > {config.tolerance:.1e}",
            theta, eta, res, it,
        )
    logger.debug("%s %s converged in %d iterations (residual %.2e)", kind.value, method.value, it, res)
    return FittedModel(kind, theta, eta, st, tuple(row_labels), tuple(col_labels), diag)


def merca(g: WeightedBipartiteGraph | StrengthVectors, model, row_labels=None, col_labels=None) -> FittedModel:
    """Closed-form MERCA model: every expected weight is ``s_i sigma_a / W``."""
    kind = ModelKind(model)
    if not kind.closed_form:
        raise ValueError(f"{kind.value} is not a closed-form model")
    if isinstance(g, WeightedBipartiteGraph):
        st = _strengths(g)
        row_labels, col_labels = g.row_labels, g.col_labels
    else:
        st = g
        row_labels = tuple(row_labels or (f"r{i}" for i in range(len(st.row_strengths))))
        col_labels = tuple(col_labels or (f"c{a}" for a in range(len(st.col_strengths))))
    diag = Diagnostics(method="closed_form", iterations=0, residual=0.0, converged=True)
    return FittedModel(kind, None, None, st, tuple(row_labels), tuple(col_labels), diag)


def fit(g: WeightedBipartiteGraph, model, config: SolverConfig | None = None) -> FittedModel:
    """Fit any of the four models on ``g``, dropping isolated nodes for the BiWCMs."""
    kind = ModelKind(model)
    if kind.closed_form:
        return merca(g, kind)
    reduced, _, _ = drop_isolated(g)
    return solve(reduced, kind, config)
