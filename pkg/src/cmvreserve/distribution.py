"""Bootstrap reserve distributions and their summary statistics.

Shared by the copula bootstrap and the chain-ladder benchmark so that both
report in one format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUANTILES = (0.5, 0.75, 0.95, 0.995)
CHUNK = 256
DEFAULT_B = 5000


@dataclass
class ReserveDistribution:
    """Bootstrap reserves: ``per_year[i]`` holds B draws of the reserve of accident year i."""

    per_year: dict
    method: str = "clsc"
    flagged: int = 0
    total: np.ndarray = field(init=False)

    def __post_init__(self):
        self.total = total_of(self.per_year)

    @property
    def B(self) -> int:
        return int(self.total.size)

    @property
    def summary(self):
        return summarize(self)

    def matrix(self) -> np.ndarray:
        """Replications x (years 2..n, total)."""
        cols = [self.per_year[i] for i in sorted(self.per_year)] + [self.total]
        return np.column_stack(cols)


def total_of(per_year: dict) -> np.ndarray:
    years = sorted(per_year)
    tot = np.array(per_year[years[0]], dtype=np.float64, copy=True)
    for i in years[1:]:
        tot += per_year[i]
    return tot


@dataclass(frozen=True)
class SummaryRow:
    target: str
    mean: float
    se: float
    quantiles: tuple
    cov: float


def summarize_values(values, target="total") -> SummaryRow:
    """Mean, sample sd, type-7 quantiles and CoV (percent) of bootstrap draws."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise ValueError("at least 2 replications are needed for a standard error")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    q = tuple(float(v) for v in np.quantile(x, QUANTILES, method="linear"))
    cov = 100.0 * sd / mean if mean != 0 else float("nan")
    return SummaryRow(str(target), mean, sd, q, cov)


def summarize(dist: ReserveDistribution) -> list[SummaryRow]:
    rows = [summarize_values(dist.per_year[i], i) for i in sorted(dist.per_year)]
    rows.append(summarize_values(dist.total, "total"))
    return rows
