"""Chain-ladder benchmark: Mack's deterministic estimates and the over-dispersed
Poisson residual bootstrap (BCL)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distribution import CHUNK, ReserveDistribution
from .rng import RngStream, gamma_variates
from .triangle import Triangle, cumulate, observed_mask


class ChainLadderError(ValueError):
    pass


@dataclass(frozen=True)
class ChainLadderFit:
    factors: np.ndarray  # f_j, j = 1..n-1
    sigma2: np.ndarray  # sigma^2_j, j = 1..n-1
    point_reserves: dict

    @property
    def total_reserve(self) -> float:
        return float(sum(self.point_reserves.values()))


def _factors(c: np.ndarray) -> np.ndarray:
    n = c.shape[0]
    f = np.empty(n - 1)
    for j in range(n - 1):
        den = c[: n - 1 - j, j].sum()
        if den == 0:
            raise ChainLadderError(f"zero column sum in development year {j + 1}")
        f[j] = c[: n - 1 - j, j + 1].sum() / den
    return f


def _project(c: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Complete the square from each row's latest diagonal."""
    n = c.shape[0]
    full = c.copy()
    for i in range(1, n):
        for j in range(n - i, n):
            full[i, j] = full[i, j - 1] * f[j - 1]
    return full


def fit_chain_ladder(t: Triangle) -> ChainLadderFit:
    c = cumulate(t).values
    n = c.shape[0]
    f = _factors(c)
    s2 = np.zeros(n - 1)
    for j in range(n - 2):
        rows = n - 1 - j
        if rows > 1:
            y0, y1 = c[:rows, j], c[:rows, j + 1]
            s2[j] = np.sum(y0 * (y1 / y0 - f[j]) ** 2) / (rows - 1)
    # last variance by Mack's extrapolation; with n = 3 only one estimate exists
    if n - 3 >= 1 and s2[n - 4] > 0:
        s2[n - 2] = min(s2[n - 3] ** 2 / s2[n - 4], s2[n - 4], s2[n - 3])
    else:
        s2[n - 2] = s2[n - 3] if n >= 4 else s2[0]
    full = _project(c, f)
    reserves = {i + 1: float(full[i, n - 1] - c[i, n - 1 - i]) for i in range(1, n)}
    return ChainLadderFit(f, s2, reserves)


def fitted_incrementals(t: Triangle) -> np.ndarray:
    """Expected incrementals obtained by backing the latest diagonal off with the factors."""
    c = cumulate(t).values
    n = c.shape[0]
    f = _factors(c)
    m = np.full((n, n), np.nan)
    for i in range(n):
        last = n - 1 - i
        m[i, last] = c[i, last]
        for j in range(last - 1, -1, -1):
            m[i, j] = m[i, j + 1] / f[j]
    inc = m.copy()
    inc[:, 1:] = m[:, 1:] - m[:, :-1]
    return inc


def pearson_residuals(t: Triangle):
    """Scaled Pearson residuals, dispersion and fitted incrementals of the ODP model."""
    n = t.n
    obs = observed_mask(n)
    m = fitted_incrementals(t)
    bad = [(int(i) + 1, int(j) + 1) for i, j in zip(*np.nonzero(obs & ~(m > 0)))]
    if bad:
        raise ChainLadderError(f"nonpositive fitted incrementals at cells {bad}")
    c = cumulate(t).values
    x = c.copy()
    x[:, 1:] = c[:, 1:] - c[:, :-1]
    r = (x[obs] - m[obs]) / np.sqrt(m[obs])
    N = int(obs.sum())
    p = 2 * n - 1
    phi = float(np.sum(r**2) / (N - p))
    return r * np.sqrt(N / (N - p)), phi, m


def _sample_process(mean, phi, rng):
    """Gamma draws with mean ``m`` and variance ``phi*|m|``; sign kept for negative means."""
    out = np.zeros_like(mean)
    nz = mean != 0
    if phi <= 0:
        return mean.copy()
    a = np.abs(mean[nz])
    out[nz] = np.sign(mean[nz]) * gamma_variates(a / phi, phi, rng, size=a.shape)
    return out


def bootstrap_chain_ladder(
    t: Triangle,
    B: int = 5000,
    rng: RngStream | None = None,
    *,
    process_variance: bool = True,
    threads: int = 1,
) -> ReserveDistribution:
    """England-Verrall over-dispersed Poisson bootstrap of chain-ladder reserves."""
    if B < 1:
        raise ValueError("B must be >= 1")
    rng = rng if rng is not None else RngStream(0)
    n = t.n
    obs = observed_mask(n)
    r_adj, phi, m = pearson_residuals(t)
    m_obs = m[obs]
    N = r_adj.size

    def one(b):
        s = rng.split(b)
        star = r_adj[s.integers(N, size=N)]
        x = np.full((n, n), np.nan)
        x[obs] = m_obs + star * np.sqrt(m_obs)
        c = np.where(obs, np.cumsum(np.nan_to_num(x), axis=1), np.nan)
        full = _project(c, _factors(c))
        fut_inc = np.diff(np.concatenate([np.zeros((n, 1)), full], axis=1), axis=1)
        fut = ~obs
        if process_variance:
            fut_inc[fut] = _sample_process(fut_inc[fut], phi, s.split(0))
        return np.array([fut_inc[i, fut[i]].sum() for i in range(1, n)])

    def run(chunk):
        return np.stack([one(b) for b in chunk])

    chunks = [range(k, min(k + CHUNK, B)) for k in range(0, B, CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(ch) for ch in chunks]
    R = np.concatenate(parts)
    return ReserveDistribution({i: R[:, i - 2].copy() for i in range(2, n + 1)}, "bcl")
