"""Empirical residual marginal, Kendall tau and pseudo-likelihood fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .families import _IMPL, CopulaError, CopulaFamily

# Search intervals for the pseudo-likelihood; all families have scalar gamma.
SEARCH_DOMAIN = {
    "gumbel": (1.0, 50.0),
    "clayton": (1e-6, 50.0),
    "frank": (-50.0, 50.0),
    "gaussian": (-0.999, 0.999),
    "t5": (-0.999, 0.999),
}
GRID_POINTS = 25


class EmpiricalMarginal:
    """Empirical distribution of residuals with denominator ``K + 1``.

    ``cdf`` is right-continuous and never reaches 1, so pseudo-observations
    stay inside the unit interval. ``quantile`` is the left-continuous
    generalized inverse; arguments above ``K/(K+1)`` map to the largest
    residual.
    """

    def __init__(self, residuals):
        vals = list(residuals.values()) if isinstance(residuals, dict) else list(residuals)
        self.sorted_residuals = np.sort(np.asarray(vals, dtype=np.float64))
        if self.sorted_residuals.size == 0:
            raise CopulaError("no residuals")
        self.denominator = self.sorted_residuals.size + 1

    def __len__(self):
        return self.sorted_residuals.size

    def cdf(self, e):
        return np.searchsorted(self.sorted_residuals, e, side="right") / self.denominator

    def quantile(self, x):
        x = np.asarray(x, dtype=np.float64)
        k = np.ceil(x * self.denominator).astype(np.int64)
        k = np.clip(k, 1, self.sorted_residuals.size)
        return self.sorted_residuals[k - 1]


def kendall_tau(pairs) -> float:
    """Sample Kendall tau ``(concordant - discordant) / (N choose 2)``; ties count as neither."""
    p = np.asarray(pairs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 2:
        raise ValueError("kendall_tau needs at least 2 pairs")
    x, y = p[:, 0], p[:, 1]
    n0 = p.shape[0] * (p.shape[0] - 1) / 2.0
    if np.all(x == x[0]) or np.all(y == y[0]):
        return 0.0
    # scipy's tau-b = (C - D) / sqrt((n0 - n1)(n0 - n2)); undo the tie correction
    tau_b = stats.kendalltau(x, y, variant="b").statistic
    n1 = _tied_pairs(x)
    n2 = _tied_pairs(y)
    return float(tau_b * np.sqrt((n0 - n1) * (n0 - n2)) / n0)


def _tied_pairs(a):
    _, counts = np.unique(a, return_counts=True)
    return float(np.sum(counts * (counts - 1) / 2.0))


def residual_pairs(residuals: dict) -> np.ndarray:
    """Consecutive in-row pairs ``(e[i, j-1], e[i, j])`` for rows with >= 2 residuals."""
    out = [
        (residuals[(i, j - 1)], residuals[(i, j)])
        for (i, j) in sorted(residuals)
        if j >= 3 and (i, j - 1) in residuals
    ]
    return np.asarray(out, dtype=np.float64).reshape(-1, 2)


def pseudo_observations(residuals: dict) -> np.ndarray:
    g = EmpiricalMarginal(residuals)
    return g.cdf(residual_pairs(residuals))


@dataclass(frozen=True)
class CopulaFit:
    family: CopulaFamily
    gamma_hat: float
    log_likelihood: float
    kendall_tau_sample: float


def pseudo_loglik(tag: str, gamma, uv: np.ndarray):
    """Pseudo log-likelihood; ``gamma`` may be an array (evaluated per value)."""
    g = np.atleast_1d(np.asarray(gamma, dtype=np.float64))[:, None]
    logpdf = _IMPL[tag][1]
    u, v = uv[:, 0][None, :], uv[:, 1][None, :]
    with np.errstate(all="ignore"):
        vals = np.sum(logpdf(u, v, g), axis=1)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    return vals if np.ndim(gamma) else float(vals[0])


def fit_pairs(tag: str, uv: np.ndarray, grid_points: int = GRID_POINTS):
    """Maximise the pseudo log-likelihood over the family's search interval.

    A grid locates the best cell, then bounded Brent refines inside the two
    neighbouring cells. Returns ``(gamma_hat, loglik)``.
    """
    if uv.shape[0] == 0:
        raise CopulaError("empty pair set")
    lo, hi = SEARCH_DOMAIN[tag]
    grid = np.linspace(lo, hi, grid_points)
    if tag in ("gumbel", "clayton"):
        # dependence concentrates at small parameters
        grid = lo + (hi - lo) * np.linspace(0.0, 1.0, grid_points) ** 3
    ll = pseudo_loglik(tag, grid, uv)
    k = int(np.argmax(ll))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    res = optimize.minimize_scalar(
        lambda g: -pseudo_loglik(tag, g, uv),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-10},
    )
    g_hat, l_hat = float(res.x), -float(res.fun)
    if ll[k] > l_hat:
        g_hat, l_hat = float(grid[k]), float(ll[k])
    if not np.isfinite(l_hat):
        raise CopulaError(f"pseudo-likelihood optimisation failed for {tag}")
    return g_hat, l_hat


def fit_copula(residuals: dict, tag: str) -> CopulaFit:
    """Canonical maximum likelihood estimate of the copula parameter."""
    if tag not in SEARCH_DOMAIN:
        raise CopulaError(f"unknown copula family {tag!r}")
    pairs = residual_pairs(residuals)
    if pairs.shape[0] == 0:
        raise CopulaError("no consecutive residual pairs (need n >= 4)")
    uv = EmpiricalMarginal(residuals).cdf(pairs)
    g_hat, l_hat = fit_pairs(tag, uv)
    tau = kendall_tau(pairs) if pairs.shape[0] >= 2 else 0.0
    return CopulaFit(CopulaFamily(tag, g_hat), g_hat, l_hat, tau)
