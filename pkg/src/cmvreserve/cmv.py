"""Conditional mean and variance (CMV) model.

A cumulative claim develops as::

    Y[i, j] = mu(Y[i, j-1], alpha, j) + sigma(Y[i, j-1], beta, j) * eps[i, j]

with ``mu = eta(alpha, j) * Y`` for a link-ratio decay ``eta`` tending to 1 and
``sigma = nu(beta, j) * Y**p`` for a decay ``nu`` tending to 0 and ``p`` either
1/2 or 1. The catalog below holds three families of each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .triangle import Triangle, cumulate

# Floor applied to the prior claim inside sqrt-type variances when simulating.
Y_FLOOR = 1e-6


class ModelError(ValueError):
    pass


def _sherman_exp(a, j):
    a1, a2 = a
    return 1.0 + a1 * a2 * j ** (-1.0 - a2) * np.exp(a1 * j ** (-a2))


def _inverse_power(a, j):
    a1, a2 = a
    return 1.0 + a1 * j ** (-a2)


def _exp_decay(a, j):
    a1, a2 = a
    return 1.0 + a1 * np.exp(-a2 * j)


def _exp(b, j):
    b1, b2 = b
    return b1 * np.exp(-b2 * j)


def _power(b, j):
    b1, b2 = b
    return b1 * j ** (-b2)


MEAN_FAMILIES = {
    "sherman_exp": _sherman_exp,
    "inverse_power": _inverse_power,
    "exp_decay": _exp_decay,
}

# tag -> (decay nu, exponent of the prior claim)
VARIANCE_FAMILIES = {
    "exp_sqrt": (_exp, 0.5),
    "power_sqrt": (_power, 0.5),
    "exp_linear": (_exp, 1.0),
}

DEFAULT_ALPHA_BOUNDS = ((1e-6, 1e3), (1e-6, 1e3))
DEFAULT_BETA_BOUNDS = ((1e-6, 1e6), (1e-6, 10.0))


def _check_box(x, bounds, name):
    if bounds is None:
        return
    for k, (v, (lo, hi)) in enumerate(zip(x, bounds)):
        if not lo <= v <= hi:
            raise ModelError(f"{name}[{k}]={v} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class CmvSpec:
    mean: str = "sherman_exp"
    variance: str = "exp_sqrt"
    alpha_bounds: tuple = DEFAULT_ALPHA_BOUNDS
    beta_bounds: tuple = DEFAULT_BETA_BOUNDS

    def __post_init__(self):
        if self.mean not in MEAN_FAMILIES:
            raise ModelError(f"unknown mean family {self.mean!r}")
        if self.variance not in VARIANCE_FAMILIES:
            raise ModelError(f"unknown variance family {self.variance!r}")
        for b in (*self.alpha_bounds, *self.beta_bounds):
            lo, hi = b
            if not (0 < lo <= hi < np.inf):
                raise ModelError(f"bounds must be finite with lower > 0, got {b}")
        object.__setattr__(self, "alpha_bounds", tuple(map(tuple, self.alpha_bounds)))
        object.__setattr__(self, "beta_bounds", tuple(map(tuple, self.beta_bounds)))

    @property
    def sqrt_variance(self) -> bool:
        return VARIANCE_FAMILIES[self.variance][1] == 0.5

    def eta(self, alpha, j):
        return MEAN_FAMILIES[self.mean](alpha, np.asarray(j, dtype=np.float64))

    def nu(self, beta, j):
        return VARIANCE_FAMILIES[self.variance][0](beta, np.asarray(j, dtype=np.float64))

    def mu(self, y_prev, alpha, j):
        return self.eta(alpha, j) * y_prev

    def sigma(self, y_prev, beta, j, floor=None):
        """Conditional standard deviation.

        With ``floor=None`` a nonpositive prior claim under a sqrt family is an
        error; otherwise the prior claim is clamped at ``floor`` first.
        """
        nu, power = VARIANCE_FAMILIES[self.variance]
        y = np.asarray(y_prev, dtype=np.float64)
        if power == 0.5:
            if floor is None:
                if np.any(y <= 0):
                    raise ModelError("variance undefined for nonpositive prior claim")
            else:
                y = np.maximum(y, floor)
            scale = np.sqrt(y)
        else:
            scale = np.abs(y)
        return nu(beta, np.asarray(j, dtype=np.float64)) * scale


def mean_step(y_prev, alpha, j, family="sherman_exp", bounds=DEFAULT_ALPHA_BOUNDS):
    """``mu(y_prev, alpha, j) = eta(alpha, j) * y_prev``."""
    if np.any(np.asarray(j) < 2):
        raise ModelError("development year j must be >= 2")
    _check_box(alpha, bounds, "alpha")
    return MEAN_FAMILIES[family](alpha, np.asarray(j, dtype=np.float64)) * y_prev


def sd_step(y_prev, beta, j, family="exp_sqrt", bounds=DEFAULT_BETA_BOUNDS, floor=None):
    if np.any(np.asarray(j) < 2):
        raise ModelError("development year j must be >= 2")
    _check_box(beta, bounds, "beta")
    return CmvSpec(variance=family).sigma(y_prev, beta, j, floor=floor)


@dataclass(frozen=True)
class CmvFit:
    spec: CmvSpec
    alpha: np.ndarray
    beta: np.ndarray
    residuals: dict = field(repr=False)

    @property
    def n(self) -> int:
        # K = n(n-1)/2 residuals
        k = len(self.residuals)
        return int(round((1 + np.sqrt(1 + 8 * k)) / 2))


def _steps(t: Triangle):
    """Observed transitions as flat arrays ``(i, j, y_prev, y)``, 1-based i, j."""
    v = cumulate(t).values
    n = v.shape[0]
    ii, jj = [], []
    for i in range(1, n):
        for j in range(2, n + 2 - i):
            ii.append(i)
            jj.append(j)
    ii = np.array(ii)
    jj = np.array(jj)
    return ii, jj, v[ii - 1, jj - 2], v[ii - 1, jj - 1]


def residuals(t: Triangle, spec: CmvSpec, alpha, beta) -> dict[tuple[int, int], float]:
    """Standardized residuals ``(Y - mu) / sigma`` over i=1..n-1, j=2..n+1-i."""
    ii, jj, y_prev, y = _steps(t)
    mu = spec.mu(y_prev, alpha, jj)
    try:
        sig = spec.sigma(y_prev, beta, jj)
    except ModelError:
        bad = [(int(a), int(b)) for a, b, p in zip(ii, jj, y_prev) if p <= 0]
        raise ModelError(
            f"variance undefined for nonpositive prior claim at cells {bad}"
        ) from None
    eps = (y - mu) / sig
    return {(int(a), int(b)): float(e) for a, b, e in zip(ii, jj, eps)}


def make_fit(t: Triangle, spec: CmvSpec, alpha, beta) -> CmvFit:
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    return CmvFit(spec, alpha, beta, residuals(t, spec, alpha, beta))


def reconstruct(t: Triangle, fit: CmvFit) -> np.ndarray:
    """Rebuild observed cells from ``mu + sigma * residual`` (row 1 column kept)."""
    v = cumulate(t).values.copy()
    for (i, j), e in fit.residuals.items():
        yp = v[i - 1, j - 2]
        v[i - 1, j - 1] = fit.spec.mu(yp, fit.alpha, j) + fit.spec.sigma(yp, fit.beta, j) * e
    return v
