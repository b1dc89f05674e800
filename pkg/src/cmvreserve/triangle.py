"""Run-off triangles: validation, CSV I/O and cumulative/incremental views."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class TriangleError(ValueError):
    """Raised for malformed triangle data."""


class TriangleKind(str, enum.Enum):
    CUMULATIVE = "cumulative"
    INCREMENTAL = "incremental"


@dataclass(frozen=True, eq=False)
class Triangle:
    """Upper-left run-off triangle of claim amounts.

    ``values`` is an ``n x n`` float array; cell ``values[i-1, j-1]`` holds the
    amount for accident year ``i`` and development year ``j`` when
    ``i + j <= n + 1`` and NaN otherwise. The array is read-only.
    """

    values: np.ndarray
    kind: TriangleKind = TriangleKind.CUMULATIVE

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise TriangleError("triangle array must be square")
        n = v.shape[0]
        if n < 3:
            raise TriangleError(f"n < 3 (got n={n})")
        mask = observed_mask(n)
        if not np.all(np.isfinite(v[mask])):
            raise TriangleError("triangle contains non-finite amounts")
        v[~mask] = np.nan
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kind", TriangleKind(self.kind))

    @classmethod
    def from_rows(cls, rows, kind=TriangleKind.CUMULATIVE) -> Triangle:
        """Build from shortening rows ``[[Y11..Y1n], [Y21..], ..., [Yn1]]``."""
        rows = [list(r) for r in rows]
        n = len(rows)
        if n < 3:
            raise TriangleError(f"n < 3 (got n={n})")
        v = np.full((n, n), np.nan)
        for i, row in enumerate(rows):
            if len(row) != n - i:
                raise TriangleError(
                    f"row {i + 1} has {len(row)} values, expected {n - i}"
                )
            v[i, : n - i] = row
        return cls(v, kind)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, ij: tuple[int, int]) -> float:
        """1-based access ``t[i, j]`` to an observed cell."""
        i, j = ij
        if not (1 <= i <= self.n and 1 <= j <= self.n + 1 - i):
            raise KeyError(f"cell ({i}, {j}) is not observed")
        return float(self.values[i - 1, j - 1])

    def rows(self) -> list[np.ndarray]:
        return [self.values[i, : self.n - i].copy() for i in range(self.n)]

    def cells(self) -> dict[tuple[int, int], float]:
        return {
            (i + 1, j + 1): float(self.values[i, j])
            for i in range(self.n)
            for j in range(self.n - i)
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, Triangle):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(
            self.values, other.values, equal_nan=True
        )

    def __repr__(self) -> str:
        return f"Triangle(n={self.n}, kind={self.kind.value})"


def observed_mask(n: int) -> np.ndarray:
    i, j = np.indices((n, n))
    return i + j <= n - 1


def cumulate(t: Triangle) -> Triangle:
    if t.kind is TriangleKind.CUMULATIVE:
        return t
    return Triangle(np.cumsum(np.nan_to_num(t.values), axis=1), TriangleKind.CUMULATIVE)


def to_incremental(t: Triangle) -> Triangle:
    if t.kind is TriangleKind.INCREMENTAL:
        return t
    v = t.values.copy()
    v[:, 1:] = v[:, 1:] - v[:, :-1]
    return Triangle(v, TriangleKind.INCREMENTAL)


def latest_diagonal(t: Triangle) -> list[tuple[int, float]]:
    """``[(i, Y[i, n+1-i]) for i = 1..n]`` of the cumulative triangle."""
    c = cumulate(t)
    n = c.n
    return [(i, float(c.values[i - 1, n - i])) for i in range(1, n + 1)]


def parse_triangle(text: str, kind=TriangleKind.CUMULATIVE) -> Triangle:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise TriangleError(f"line {lineno}: cannot parse {line!r}") from exc
        if not all(math.isfinite(x) for x in row):
            raise TriangleError(f"line {lineno}: non-finite value")
        rows.append(row)
    if not rows:
        raise TriangleError("no data lines")
    n = len(rows[0])
    if len(rows) != n:
        raise TriangleError(
            f"ragged triangle: first row has {n} values but {len(rows)} rows found"
        )
    t = Triangle.from_rows(rows, kind)
    return cumulate(t)


def load_triangle(path, kind=TriangleKind.CUMULATIVE) -> Triangle:
    """Read a triangle CSV; incremental input is cumulated row-wise."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_triangle(text, TriangleKind(kind))


def format_triangle(t: Triangle) -> str:
    lines = [",".join(f"{x:.17g}" for x in row) for row in t.rows()]
    return "\n".join(lines) + "\n"


def save_triangle(t: Triangle, path) -> None:
    Path(path).write_text(format_triangle(t), encoding="utf-8")
