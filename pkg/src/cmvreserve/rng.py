"""Seedable, splittable uniform streams.

Every stochastic routine in the package draws from an :class:`RngStream`.
A stream is identified by its master seed and a path of integer stream ids;
two streams with the same identity produce the same sequence, and child
streams obtained with :meth:`RngStream.split` are statistically independent
of their parent and siblings. Work distributed over threads or processes stays
bit-reproducible as long as each unit of work owns its own child stream.
"""

from __future__ import annotations

import numpy as np

_TWO_POW_53 = float(2**53)


class RngStream:
    """A deterministic stream of uniforms on the open interval (0, 1)."""

    def __init__(self, master_seed: int, stream_id: int = 0, _parent: tuple[int, ...] = ()):
        if master_seed < 0 or stream_id < 0:
            raise ValueError("master_seed and stream_id must be nonnegative")
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.path = tuple(_parent) + (self.stream_id,)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self.consumed = 0

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, path={self.path})"

    def split(self, stream_id: int) -> RngStream:
        """Child stream; depends only on identity, never on consumed state."""
        return RngStream(self.master_seed, stream_id, self.path)

    def uniforms(self, size=None):
        """Uniforms in (0, 1) on a 2**-53 lattice offset by half a step."""
        k = self._gen.integers(0, 2**53, size=size, dtype=np.int64)
        self.consumed += 1 if size is None else int(np.prod(size))
        return (k + 0.5) / _TWO_POW_53

    def normals(self, size=None):
        k = self._gen.standard_normal(size=size)
        self.consumed += 1 if size is None else int(np.prod(size))
        return k

    def integers(self, high: int, size=None):
        """Integers in [0, high)."""
        k = self._gen.integers(0, high, size=size)
        self.consumed += 1 if size is None else int(np.prod(size))
        return k


def as_stream(rng: RngStream | int | None) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    return RngStream(0 if rng is None else int(rng))


def gamma_variates(shape, scale, rng: RngStream, size=None):
    """Gamma(shape, scale) draws by Marsaglia-Tsang squeeze/rejection.

    ``shape`` and ``scale`` broadcast against ``size``. Shapes below one use
    the boost ``G(a) = G(a + 1) * U**(1/a)``.
    """
    shape = np.asarray(shape, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if size is None:
        size = np.broadcast(shape, scale).shape
    a = np.broadcast_to(shape, size).ravel()
    if np.any(a <= 0):
        raise ValueError("gamma shape must be positive")
    boost = a < 1.0
    d = np.where(boost, a + 1.0, a) - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(a.size)
    todo = np.arange(a.size)
    while todo.size:
        x = rng.normals(todo.size)
        u = rng.uniforms(todo.size)
        v = (1.0 + c[todo] * x) ** 3
        with np.errstate(invalid="ignore", divide="ignore"):
            ok = (v > 0) & (
                np.log(u) < 0.5 * x * x + d[todo] - d[todo] * v + d[todo] * np.log(v)
            )
        out[todo[ok]] = d[todo[ok]] * v[ok]
        todo = todo[~ok]
    if np.any(boost):
        idx = np.flatnonzero(boost)
        out[idx] *= rng.uniforms(idx.size) ** (1.0 / a[idx])
    return out.reshape(size) * np.broadcast_to(scale, size)
