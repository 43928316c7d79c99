"""Uniform periodic grids on the flat torus T^N (N = 1 or 2).

Grid functions are plain numpy arrays. A scalar field has shape ``grid.shape``;
an m-component field has shape ``(m, *grid.shape)``.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "TorusGrid",
    "torus_distance",
    "interpolate",
    "write_grid_csv",
    "read_grid_csv",
    "lipschitz_estimate",
]


@dataclass(frozen=True)
class TorusGrid:
    """``n`` nodes per axis, spacing ``h = 1/n``, nodes at ``k*h``."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays of shape ``self.shape``, one per axis (ij indexing)."""
        return list(np.meshgrid(*([self.axis()] * self.dim), indexing="ij"))

    def node_coords(self, index) -> tuple[float, ...]:
        idx = np.unravel_index(index, self.shape) if np.ndim(index) == 0 else index
        return tuple(int(i) % self.n / self.n for i in np.atleast_1d(idx))

    def flat_index(self, multi) -> int:
        multi = tuple(int(i) % self.n for i in np.atleast_1d(multi))
        return int(np.ravel_multi_index(multi, self.shape))

    def nearest_node(self, x) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float)) % 1.0
        return self.flat_index(np.rint(x * self.n).astype(int))

    def node_distance(self, i: int, j: int) -> float:
        return torus_distance(self.node_coords(i), self.node_coords(j))


def torus_distance(x, y) -> float:
    """Periodic distance ``min_k |x - y + k|`` over integer shifts ``k``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = np.abs(x - y) % 1.0
    d = np.minimum(d, 1.0 - d)
    return float(np.sqrt(np.sum(d * d)))


def interpolate(f: np.ndarray, x) -> float | np.ndarray:
    """Periodic multilinear interpolation of node values ``f`` at ``x``.

    ``f`` has shape ``(n,)`` or ``(n, n)``. ``x`` is a point ``(N,)`` or a batch
    ``(k, N)``; coordinates are wrapped into [0, 1).
    """
    f = np.asarray(f, dtype=float)
    dim = f.ndim
    pts = np.asarray(x, dtype=float)
    single = pts.ndim <= 1
    pts = pts.reshape(-1, dim)
    n = f.shape[0]
    pos = (pts % 1.0) * n
    # snap node coordinates so node values are reproduced exactly
    snapped = np.rint(pos)
    pos = np.where(np.abs(pos - snapped) < 1e-9, snapped, pos) % n
    base = np.floor(pos).astype(np.int64)
    w = pos - base
    out = np.zeros(len(pts))
    for corner in itertools.product((0, 1), repeat=dim):
        weight = np.ones(len(pts))
        idx = []
        for ax, c in enumerate(corner):
            weight = weight * (w[:, ax] if c else 1.0 - w[:, ax])
            idx.append((base[:, ax] + c) % n)
        out += weight * f[tuple(idx)]
    return float(out[0]) if single else out


def lipschitz_estimate(u: np.ndarray, grid: TorusGrid) -> float:
    """Largest forward difference quotient over all components and axes."""
    u = np.asarray(u, dtype=float)
    comps = u.reshape((-1,) + grid.shape)
    best = 0.0
    for ax in range(grid.dim):
        diff = np.abs(np.roll(comps, -1, axis=ax + 1) - comps)
        best = max(best, float(diff.max()) / grid.h)
    return best


def write_grid_csv(path, grid: TorusGrid, values: np.ndarray) -> Path:
    """Dump an m-component field as ``x1[,x2],comp_1..comp_m`` rows, row-major."""
    values = np.asarray(values, dtype=float).reshape((-1,) + grid.shape)
    m = values.shape[0]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coords = [c.ravel() for c in grid.coords()]
    flat = values.reshape(m, -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i + 1}" for i in range(grid.dim)] + [f"comp_{i + 1}" for i in range(m)])
        for k in range(grid.size):
            row = [c[k] for c in coords] + list(flat[:, k])
            writer.writerow([format(v, ".17g") for v in row])
    return path


def read_grid_csv(path) -> tuple[TorusGrid, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    dim = sum(1 for name in header if name.startswith("x"))
    n = round(len(rows) ** (1.0 / dim))
    grid = TorusGrid(dim, n)
    values = rows[:, dim:].T.reshape((-1,) + grid.shape)
    return grid, values
