"""Semiparametric bootstrap of outstanding reserves under the CMV + copula model.

Each replication draws a Markov path of uniforms from the fitted copula, maps
it through the empirical residual quantile function, centres the path, and
telescopes every open accident year from its latest diagonal value::

    Y[i, j] = mu(Y[i, j-1]) + sigma(Y[i, j-1]) * e[j],   j = n+2-i .. n

Replication ``b`` draws only from ``rng.split(b)``, so results do not depend
on how replications are scheduled across threads.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cmv import Y_FLOOR, CmvFit
from .copula.estimation import CopulaFit, EmpiricalMarginal
from .copula.families import CopulaFamily, markov_paths
from .distribution import (  # noqa: F401  re-exported
    CHUNK,
    DEFAULT_B,
    QUANTILES,
    ReserveDistribution,
    SummaryRow,
    summarize,
    summarize_values,
    total_of,
)
from .rng import RngStream
from .triangle import Triangle, cumulate, latest_diagonal

log = logging.getLogger(__name__)


def naive_point_prediction(t: Triangle, fit: CmvFit) -> dict[int, float]:
    """Plug-in conditional-mean projection of the ultimate claim for each accident year."""
    c = cumulate(t)
    n = c.n
    out = {}
    for i, y in latest_diagonal(c):
        for j in range(n + 2 - i, n + 1):
            y = float(fit.spec.mu(y, fit.alpha, j))
        out[i] = y
    return out


def naive_reserves(t: Triangle, fit: CmvFit) -> dict[int, float]:
    diag = dict(latest_diagonal(t))
    ult = naive_point_prediction(t, fit)
    return {i: ult[i] - diag[i] for i in range(2, t.n + 1)}


def center_paths(eps: np.ndarray) -> np.ndarray:
    """Subtract each path's own mean (last axis); constant paths map to exact zeros."""
    shifted = eps - eps[..., :1]
    return shifted - shifted.mean(axis=-1, keepdims=True)


def _telescope(fit: CmvFit, diag: np.ndarray, eps: np.ndarray, n: int, floor: float):
    """Reserves for years 2..n given centred residual paths.

    ``eps`` has shape (B, n-1) with column ``j-2`` for development year j, or
    (B, n-1, n-1) with one path per accident year 2..n.
    """
    spec = fit.spec
    B = eps.shape[0]
    R = np.empty((B, n - 1))
    clamps = np.zeros(B, dtype=bool)
    for i in range(2, n + 1):
        y = np.full(B, diag[i - 1])
        e = eps if eps.ndim == 2 else eps[:, i - 2, :]
        for j in range(n + 2 - i, n + 1):
            if spec.sqrt_variance:
                clamps |= y <= floor
            y = spec.mu(y, fit.alpha, j) + spec.sigma(y, fit.beta, j, floor=floor) * e[:, j - 2]
        R[:, i - 2] = y - diag[i - 1]
    return R, clamps


def bootstrap_reserves(
    t: Triangle,
    fit: CmvFit,
    cop: CopulaFit | CopulaFamily,
    B: int = DEFAULT_B,
    rng: RngStream | None = None,
    *,
    independent_rows: bool = False,
    floor: float = Y_FLOOR,
    threads: int = 1,
    marginal: EmpiricalMarginal | None = None,
) -> ReserveDistribution:
    """Semiparametric bootstrap distribution of reserves for accident years 2..n.

    By default one residual path per replication is shared by all accident
    years; ``independent_rows=True`` draws a separate path for each year from
    ``rng.split(b).split(i)``.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    rng = rng if rng is not None else RngStream(0)
    fam = cop.family if isinstance(cop, CopulaFit) else cop
    marginal = marginal or EmpiricalMarginal(fit.residuals)
    c = cumulate(t)
    n = c.n
    diag = np.array([y for _, y in latest_diagonal(c)])

    def draw(b):
        s = rng.split(b)
        if independent_rows:
            return np.stack([s.split(i).uniforms(n - 1) for i in range(2, n + 1)])
        return s.uniforms(n - 1)

    def run(chunk):
        x = np.stack([draw(b) for b in chunk])
        eps = center_paths(marginal.quantile(markov_paths(fam, x)))
        return _telescope(fit, diag, eps, n, floor)

    chunks = [range(k, min(k + CHUNK, B)) for k in range(0, B, CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(ch) for ch in chunks]
    R = np.concatenate([p[0] for p in parts])
    flagged = int(sum(np.sum(p[1]) for p in parts))
    if flagged:
        log.warning("%d of %d replications clamped a nonpositive claim at %g", flagged, B, floor)
    return ReserveDistribution({i: R[:, i - 2].copy() for i in range(2, n + 1)}, "clsc", flagged)
