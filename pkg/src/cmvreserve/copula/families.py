"""Bivariate one-parameter copulas: Gumbel, Clayton, Frank, Gaussian and t(5).

Each family supplies the distribution function ``C(u, v)``, its density
``c(u, v)``, the conditional distribution ``C_{2|1}(v | u) = dC/du`` and the
inverse of the latter in ``v``. All evaluators broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

FAMILIES = ("gumbel", "clayton", "frank", "gaussian", "t5")
T_DF = 5.0
_FRANK_ZERO = 1e-8
_EDGE = 1e-12


class CopulaError(ValueError):
    pass


# -- Gumbel -------------------------------------------------------------------

def _gumbel_parts(u, v, g):
    x = -np.log(u)
    y = -np.log(v)
    lx, ly = np.log(x), np.log(y)
    # log A with A = x**g + y**g, computed stably
    m = np.maximum(lx, ly)
    log_a = g * m + np.log(np.exp(g * (lx - m)) + np.exp(g * (ly - m)))
    w = np.exp(log_a / g)
    return x, y, lx, ly, log_a, w


def _gumbel_cdf(u, v, g):
    return np.exp(-_gumbel_parts(u, v, g)[5])


def _gumbel_logpdf(u, v, g):
    x, y, lx, ly, log_a, w = _gumbel_parts(u, v, g)
    return (
        -w + x + y + (g - 1.0) * (lx + ly) + (2.0 / g - 2.0) * log_a
        + np.log1p((g - 1.0) / w)
    )


def _gumbel_h(v, u, g):
    x, y, lx, ly, log_a, w = _gumbel_parts(u, v, g)
    return np.exp(-w + (1.0 / g - 1.0) * log_a + (g - 1.0) * lx + x)


# -- Clayton ------------------------------------------------------------------

def _clayton_cdf(u, v, g):
    return (u ** (-g) + v ** (-g) - 1.0) ** (-1.0 / g)


def _clayton_logpdf(u, v, g):
    s = u ** (-g) + v ** (-g) - 1.0
    return np.log1p(g) - (g + 1.0) * (np.log(u) + np.log(v)) - (1.0 / g + 2.0) * np.log(s)


def _clayton_h(v, u, g):
    s = u ** (-g) + v ** (-g) - 1.0
    return u ** (-g - 1.0) * s ** (-1.0 / g - 1.0)


def _clayton_hinv(x, u, g):
    return ((x ** (-g / (1.0 + g)) - 1.0) * u ** (-g) + 1.0) ** (-1.0 / g)


# -- Frank --------------------------------------------------------------------

def _frank_cdf(u, v, g):
    if abs(g) < _FRANK_ZERO:
        return u * v
    return -np.log1p(np.expm1(-g * u) * np.expm1(-g * v) / np.expm1(-g)) / g


def _frank_logpdf(u, v, g):
    # array-valued g allowed; near-zero g is the independence copula
    g = np.asarray(g, dtype=np.float64)
    small = np.abs(g) < _FRANK_ZERO
    gs = np.where(small, 1.0, g)
    em = -np.expm1(-gs)  # 1 - e^{-g}
    den = em - (-np.expm1(-gs * u)) * (-np.expm1(-gs * v))
    out = np.log(gs * em) - gs * (u + v) - 2.0 * np.log(np.abs(den))
    return np.where(small, 0.0, out)


def _frank_h(v, u, g):
    if abs(g) < _FRANK_ZERO:
        return v * np.ones_like(u)
    a = np.expm1(-g * u)
    b = np.expm1(-g * v)
    return np.exp(-g * u) * b / (np.expm1(-g) + a * b)


def _frank_hinv(x, u, g):
    if abs(g) < _FRANK_ZERO:
        return x * np.ones_like(u)
    w = x * np.expm1(-g) / (np.exp(-g * u) * (1.0 - x) + x)
    return -np.log1p(w) / g


# -- Gaussian -----------------------------------------------------------------

def _gauss_logpdf(u, v, r):
    a, b = special.ndtri(u), special.ndtri(v)
    q = 1.0 - r * r
    return -0.5 * np.log(q) - (r * r * (a * a + b * b) - 2.0 * r * a * b) / (2.0 * q)


def _gauss_h(v, u, r):
    a, b = special.ndtri(u), special.ndtri(v)
    return special.ndtr((b - r * a) / np.sqrt(1.0 - r * r))


def _gauss_hinv(x, u, r):
    a = special.ndtri(u)
    return special.ndtr(r * a + np.sqrt(1.0 - r * r) * special.ndtri(x))


# -- Student t, 5 degrees of freedom ------------------------------------------

_T = stats.t(T_DF)
_T1 = stats.t(T_DF + 1.0)
_T_CONST = special.gammaln((T_DF + 2.0) / 2.0) - special.gammaln(T_DF / 2.0) - np.log(T_DF * np.pi)


def _t_logpdf(u, v, r):
    a, b = _T.ppf(u), _T.ppf(v)
    q = 1.0 - r * r
    log_joint = _T_CONST - 0.5 * np.log(q) - (T_DF + 2.0) / 2.0 * np.log1p(
        (a * a + b * b - 2.0 * r * a * b) / (T_DF * q)
    )
    return log_joint - _T.logpdf(a) - _T.logpdf(b)


def _t_scale(a, r):
    return np.sqrt((T_DF + a * a) * (1.0 - r * r) / (T_DF + 1.0))


def _t_h(v, u, r):
    a, b = _T.ppf(u), _T.ppf(v)
    return _T1.cdf((b - r * a) / _t_scale(a, r))


def _t_hinv(x, u, r):
    a = _T.ppf(u)
    return _T.cdf(r * a + _t_scale(a, r) * _T1.ppf(x))


# -- generic ------------------------------------------------------------------

def _bisect_hinv(h, x, u, g, max_iter=200):
    """Solve ``h(v | u) = x`` for v by vectorized bisection."""
    x, u = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
    lo = np.full(x.shape, _EDGE)
    hi = np.full(x.shape, 1.0 - _EDGE)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.all((mid <= lo) | (mid >= hi)):
            break
        below = h(mid, u, g) < x
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    # pick the bracket end with the smaller residual
    e_lo = np.abs(h(lo, u, g) - x)
    e_hi = np.abs(h(hi, u, g) - x)
    return np.where(e_lo < e_hi, lo, hi)


_IMPL = {
    # tag: (cdf, logpdf, h, hinv or None)
    "gumbel": (_gumbel_cdf, _gumbel_logpdf, _gumbel_h, None),
    "clayton": (_clayton_cdf, _clayton_logpdf, _clayton_h, _clayton_hinv),
    "frank": (_frank_cdf, _frank_logpdf, _frank_h, _frank_hinv),
    "gaussian": (None, _gauss_logpdf, _gauss_h, _gauss_hinv),
    "t5": (None, _t_logpdf, _t_h, _t_hinv),
}

# Parameter value giving the independence copula, where one exists in the family.
INDEPENDENCE = {"gumbel": 1.0, "frank": 0.0, "gaussian": 0.0, "t5": None, "clayton": None}


def _check_unit(*arrays):
    for a in arrays:
        a = np.asarray(a)
        if np.any(~(a > 0.0) | ~(a < 1.0)):
            raise CopulaError("arguments must lie strictly inside (0, 1)")


@dataclass(frozen=True)
class CopulaFamily:
    """A copula family tag together with its scalar parameter ``gamma``."""

    tag: str
    gamma: float

    def __post_init__(self):
        if self.tag not in _IMPL:
            raise CopulaError(f"unknown copula family {self.tag!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "gamma", float(self.gamma))
        if not in_domain(self.tag, self.gamma):
            raise CopulaError(f"gamma={self.gamma} outside the {self.tag} parameter domain")

    @property
    def is_independence(self) -> bool:
        return INDEPENDENCE[self.tag] is not None and (
            abs(self.gamma - INDEPENDENCE[self.tag]) < (_FRANK_ZERO if self.tag == "frank" else 1e-15)
        )

    def cdf(self, u, v):
        cdf = _IMPL[self.tag][0]
        u, v = np.asarray(u, float), np.asarray(v, float)
        if cdf is not None:
            with np.errstate(divide="ignore", over="ignore"):
                # boundary values follow from the uniform margins
                inner = np.clip(u, _EDGE, 1 - _EDGE), np.clip(v, _EDGE, 1 - _EDGE)
                out = cdf(*inner, self.gamma)
            out = np.where(u >= 1.0, v, np.where(v >= 1.0, u, out))
            return np.where((u <= 0.0) | (v <= 0.0), 0.0, out)
        # elliptical families: integrate the conditional distribution over u
        def one(a, b):
            if a <= 0.0 or b <= 0.0:
                return 0.0
            if b >= 1.0:
                return a
            if a >= 1.0:
                return b
            val, _ = integrate.quad(lambda s: float(self.conditional_cdf(b, s)), 0.0, a,
                                    epsabs=1e-13, epsrel=1e-12, limit=200)
            return val
        return np.vectorize(one, otypes=[float])(u, v)

    def logpdf(self, u, v):
        _check_unit(u, v)
        if self.is_independence:
            return np.zeros(np.broadcast(np.asarray(u), np.asarray(v)).shape)
        return _IMPL[self.tag][1](np.asarray(u, float), np.asarray(v, float), self.gamma)

    def density(self, u, v):
        return np.exp(self.logpdf(u, v))

    def conditional_cdf(self, v, u):
        """``C_{2|1}(v | u)``."""
        _check_unit(u, v)
        if self.is_independence:
            return np.asarray(v, float) * np.ones_like(np.asarray(u, float))
        out = _IMPL[self.tag][2](np.asarray(v, float), np.asarray(u, float), self.gamma)
        return np.clip(out, 0.0, 1.0)

    def conditional_inverse(self, x, u):
        """Solve ``C_{2|1}(v | u) = x`` for v."""
        _check_unit(u, x)
        x, u = np.asarray(x, float), np.asarray(u, float)
        if self.is_independence:
            return x * np.ones_like(u)
        hinv = _IMPL[self.tag][3]
        if hinv is None:
            v = _bisect_hinv(_IMPL[self.tag][2], x, u, self.gamma)
        else:
            v = hinv(x, u, self.gamma)
        if not np.all(np.isfinite(v)):
            raise CopulaError(f"conditional inverse failed for {self} at x={x}, u={u}")
        return np.clip(v, _EDGE, 1.0 - _EDGE)

    def kendall_tau(self) -> float:
        """Population Kendall tau of the copula."""
        g = self.gamma
        if self.tag == "gumbel":
            return 1.0 - 1.0 / g
        if self.tag == "clayton":
            return g / (g + 2.0)
        if self.tag == "frank":
            if abs(g) < _FRANK_ZERO:
                return 0.0
            d1 = integrate.quad(lambda t: t / np.expm1(t) if t else 1.0, 0.0, abs(g))[0] / abs(g)
            return float(np.sign(g) * (1.0 - 4.0 / abs(g) * (1.0 - d1)))
        return 2.0 / np.pi * np.arcsin(g)


def in_domain(tag: str, gamma: float) -> bool:
    if not np.isfinite(gamma):
        return False
    if tag == "gumbel":
        return gamma >= 1.0
    if tag == "clayton":
        return gamma > 0.0
    if tag == "frank":
        return True
    return -1.0 < gamma < 1.0


def density(fam: CopulaFamily, u, v):
    return fam.density(u, v)


def conditional_cdf(fam: CopulaFamily, v, u):
    return fam.conditional_cdf(v, u)


def conditional_inverse(fam: CopulaFamily, x, u):
    return fam.conditional_inverse(x, u)


def markov_paths(fam: CopulaFamily, x) -> np.ndarray:
    """Turn iid uniforms ``x`` (shape ``(..., L)``) into stationary Markov paths.

    The first component is kept; each later one is ``C_{2|1}^{-1}(x_k | u_{k-1})``.
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.empty_like(x)
    u[..., 0] = x[..., 0]
    for k in range(1, x.shape[-1]):
        u[..., k] = fam.conditional_inverse(x[..., k], u[..., k - 1])
    return u


def sample_markov_path(fam: CopulaFamily, length: int, rng) -> np.ndarray:
    if length < 1:
        raise CopulaError("path length must be >= 1")
    return markov_paths(fam, rng.uniforms(length))


def sample_pairs(fam: CopulaFamily, size: int, rng) -> np.ndarray:
    """``size`` iid pairs from the copula by conditional inversion."""
    x = rng.uniforms((size, 2))
    return markov_paths(fam, x)
