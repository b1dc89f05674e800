"""Conditional least squares for the CMV model.

The mean parameters minimise the weighted squared standardized deviations
``M_n`` for fixed variance parameters; the variance parameters minimise the
squared discrepancy ``V_n`` between squared deviations and the modelled
variance for fixed mean parameters. :func:`fit_cls` alternates the two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .cmv import CmvFit, CmvSpec, ModelError, _steps, make_fit
from .rng import RngStream
from .triangle import Triangle

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClsConfig:
    max_iterations: int = 50
    epsilon: float = 1e-6
    optimizer_restarts: int = 1
    initial_beta: tuple | None = None
    initial_alpha: tuple | None = None
    seed: int = 0
    xatol: float = 1e-10
    maxfev: int = 4000

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.optimizer_restarts < 0:
            raise ValueError("optimizer_restarts must be >= 0")


@dataclass
class ClsTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False
    warnings: list = field(default_factory=list)


class _Design:
    """Flattened observed transitions with their M_n / V_n weights."""

    def __init__(self, t: Triangle, spec: CmvSpec):
        self.spec = spec
        self.ii, self.jj, self.y_prev, self.y = _steps(t)
        n = t.n
        if np.any(self.y_prev <= 0) and spec.sqrt_variance:
            raise ModelError("observed triangle has nonpositive cumulative claims")
        self.w = 1.0 / ((n - 1) * (n + 1 - self.jj))
        self.jf = self.jj.astype(np.float64)

    def dev2(self, alpha):
        return (self.y - self.spec.eta(alpha, self.jf) * self.y_prev) ** 2

    def var(self, beta):
        return self.spec.sigma(self.y_prev, beta, self.jf) ** 2

    def M(self, alpha, beta):
        return float(np.sum(self.w * self.dev2(alpha) / self.var(beta)))

    def V(self, alpha, beta):
        return float(np.sum(self.w * (self.dev2(alpha) - self.var(beta)) ** 2))


def objective_M(t: Triangle, spec: CmvSpec, alpha, beta) -> float:
    return _Design(t, spec).M(np.asarray(alpha, float), np.asarray(beta, float))


def objective_V(t: Triangle, spec: CmvSpec, alpha, beta) -> float:
    return _Design(t, spec).V(np.asarray(alpha, float), np.asarray(beta, float))


def _safe(f):
    def g(x):
        with np.errstate(all="ignore"):
            v = f(x)
        return v if np.isfinite(v) else np.inf
    return g


def minimize_box(f, x0, bounds, *, restarts=0, rng=None, xatol=1e-10, maxfev=4000):
    """Bounded Nelder-Mead from ``x0`` plus jittered restarts.

    Never returns a point worse than ``x0``. Returns ``(x, f(x))``.
    """
    f = _safe(f)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    x0 = np.clip(np.asarray(x0, dtype=np.float64), lo, hi)
    f0 = f(x0)
    scale = abs(f0) if np.isfinite(f0) and f0 != 0 else 1.0

    def run(start):
        res = minimize(
            lambda x: f(np.clip(x, lo, hi)) / scale,
            start,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"xatol": xatol, "fatol": 1e-15, "maxfev": maxfev, "adaptive": False},
        )
        x = np.clip(res.x, lo, hi)
        return x, f(x)

    best_x, best_f = x0, f0
    starts = [x0]
    if restarts:
        rng = rng if rng is not None else RngStream(0)
        for _ in range(restarts):
            starts.append(None)
    for k, start in enumerate(starts):
        if start is None:
            jitter = 1.0 + 0.1 * (2.0 * rng.uniforms(len(x0)) - 1.0)
            start = np.clip(best_x * jitter, lo, hi)
        x, fx = run(start)
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _grid_start(f, bounds, points=25):
    """Best point of a log-spaced grid over the box."""
    axes = [np.geomspace(lo, hi, points) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=1)
    g = _safe(f)
    vals = np.array([g(c) for c in cand])
    return cand[int(np.argmin(vals))]


def default_initial_beta(t: Triangle, spec: CmvSpec) -> np.ndarray:
    """Moment-based start: spread of first development increments over the claim scale."""
    v = t.values
    n = t.n
    inc = v[: n - 1, 1] - v[: n - 1, 0]
    first = v[:, 0]
    sd = float(np.std(inc, ddof=1)) if len(inc) > 1 else float(abs(inc[0]))
    scale = np.sqrt(abs(first.mean())) if spec.sqrt_variance else abs(first.mean())
    b1 = sd / scale if scale > 0 else 1.0
    lo, hi = spec.beta_bounds[0]
    return np.array([np.clip(b1, lo, hi), np.clip(0.5, *spec.beta_bounds[1])])


def _at_boundary(x, bounds, rtol=1e-7):
    return any(
        abs(v - lo) <= rtol * max(1.0, abs(lo)) or abs(v - hi) <= rtol * max(1.0, abs(hi))
        for v, (lo, hi) in zip(x, bounds)
    )


def fit_cls(t: Triangle, spec: CmvSpec | None = None, cfg: ClsConfig | None = None):
    """Iterative conditional least squares; returns ``(CmvFit, ClsTrace)``."""
    spec = spec or CmvSpec()
    cfg = cfg or ClsConfig()
    d = _Design(t, spec)
    rng = RngStream(cfg.seed)
    trace = ClsTrace()
    opt = dict(restarts=cfg.optimizer_restarts, xatol=cfg.xatol, maxfev=cfg.maxfev)

    beta = (
        np.asarray(cfg.initial_beta, dtype=np.float64)
        if cfg.initial_beta is not None
        else default_initial_beta(t, spec)
    )
    # placeholder alpha^(0); never used as an optimizer start
    prev = np.concatenate([np.zeros(len(spec.alpha_bounds)), beta])

    def alpha_step(a_start, b, m):
        return minimize_box(lambda a: d.M(a, b), a_start, spec.alpha_bounds, rng=rng.split(2 * m), **opt)

    def beta_step(a, b_start, m):
        return minimize_box(lambda b: d.V(a, b), b_start, spec.beta_bounds, rng=rng.split(2 * m + 1), **opt)

    if cfg.initial_alpha is not None:
        a_start = np.asarray(cfg.initial_alpha, dtype=np.float64)
    else:
        a_start = _grid_start(lambda a: d.M(a, beta), spec.alpha_bounds)
    alpha, _ = alpha_step(a_start, beta, 0)
    beta, _ = beta_step(alpha, beta, 0)
    _record(trace, d, alpha, beta)

    m = 1
    cur = np.concatenate([alpha, beta])
    while m <= cfg.max_iterations and np.linalg.norm(cur - prev) > cfg.epsilon:
        alpha, _ = alpha_step(alpha, beta, m)
        beta, _ = beta_step(alpha, beta, m)
        _record(trace, d, alpha, beta)
        prev, cur = cur, np.concatenate([alpha, beta])
        m += 1

    trace.converged = bool(np.linalg.norm(cur - prev) <= cfg.epsilon)
    if not trace.converged:
        trace.warnings.append(f"no convergence within {cfg.max_iterations} iterations")
    if _at_boundary(alpha, spec.alpha_bounds):
        trace.warnings.append(f"alpha estimate {alpha.tolist()} on the parameter box boundary")
    if _at_boundary(beta, spec.beta_bounds):
        trace.warnings.append(f"beta estimate {beta.tolist()} on the parameter box boundary")
    for w in trace.warnings:
        log.warning(w)
    return make_fit(t, spec, alpha, beta), trace


def _record(trace, d, alpha, beta):
    mv, vv = d.M(alpha, beta), d.V(alpha, beta)
    if not (np.isfinite(mv) and np.isfinite(vv)):
        raise EstimationError(
            f"non-finite objective at alpha={alpha.tolist()}, beta={beta.tolist()}"
        )
    trace.iterations.append((alpha.copy(), beta.copy(), mv, vv))
