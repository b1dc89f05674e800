"""Rosenblatt-transform goodness-of-fit test for the residual copula.

The statistic compares the empirical distribution of the Rosenblatt-transformed
pseudo-observations with the independence copula::

    S = sum_k (D_N(E_k) - E_k1 * E_k2)**2

and its null distribution is approximated by a parametric bootstrap that
regenerates Markov residual rows with the observed layout and refits gamma.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..rng import RngStream
from .estimation import EmpiricalMarginal, fit_pairs, residual_pairs
from .families import CopulaFamily, markov_paths


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    bootstrap_replicates: int
    gamma_hat: float
    family: str


def rosenblatt_statistic(fam: CopulaFamily, uv: np.ndarray) -> float:
    e1 = uv[:, 0]
    e2 = fam.conditional_cdf(uv[:, 1], uv[:, 0])
    # D_N(E_k): share of transformed points dominated componentwise by E_k
    le = (e1[None, :] <= e1[:, None]) & (e2[None, :] <= e2[:, None])
    d = le.mean(axis=1)
    return float(np.sum((d - e1 * e2) ** 2))


class _Layout:
    """Index bookkeeping for residual maps: rows of consecutive development years."""

    def __init__(self, residuals: dict):
        keys = sorted(residuals)
        rows = sorted({i for i, _ in keys})
        self.lengths = [sum(1 for k in keys if k[0] == i) for i in rows]
        self.width = max(self.lengths)
        # position of each residual in a (rows, width) path array
        self.cells = np.array([(rows.index(i), j - 2) for i, j in keys])
        flat = {k: n for n, k in enumerate(keys)}
        pairs = [(flat[(i, j - 1)], flat[(i, j)]) for i, j in keys if (i, j - 1) in flat]
        self.pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def pseudo_pairs(self, paths: np.ndarray) -> np.ndarray:
        """Pseudo-observation pairs of one simulated residual set."""
        vals = paths[self.cells[:, 0], self.cells[:, 1]]
        ranks = np.empty(vals.size)
        ranks[np.argsort(vals, kind="stable")] = np.arange(1, vals.size + 1)
        g = ranks / (vals.size + 1.0)
        return g[self.pairs]


def gof_test(residuals: dict, tag: str, bootstrap_replicates: int = 1000,
             rng: RngStream | None = None, threads: int = 1) -> GofResult:
    """Parametric-bootstrap p-value of the Rosenblatt statistic for family ``tag``.

    Replicate ``b`` uses only ``rng.split(b)``; its simulated residual rows keep
    the observed row lengths, and gamma is refitted on every replicate.
    """
    if bootstrap_replicates < 100:
        raise ValueError("bootstrap_replicates must be >= 100")
    rng = rng if rng is not None else RngStream(0)
    uv = EmpiricalMarginal(residuals).cdf(residual_pairs(residuals))
    g_hat, _ = fit_pairs(tag, uv)
    fam = CopulaFamily(tag, g_hat)
    stat = rosenblatt_statistic(fam, uv)
    lay = _Layout(residuals)
    shape = (len(lay.lengths), lay.width)

    def run(chunk):
        x = np.stack([rng.split(b).uniforms(shape) for b in chunk])
        paths = markov_paths(fam, x)
        out = []
        for p in paths:
            uv_b = lay.pseudo_pairs(p)
            g_b, _ = fit_pairs(tag, uv_b)
            out.append(rosenblatt_statistic(CopulaFamily(tag, g_b), uv_b))
        return out

    chunks = [range(k, min(k + 64, bootstrap_replicates)) for k in range(0, bootstrap_replicates, 64)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(ch) for ch in chunks]
    stats_b = np.concatenate(parts)
    p = float(np.mean(stats_b > stat))
    return GofResult(stat, p, bootstrap_replicates, g_hat, tag)
