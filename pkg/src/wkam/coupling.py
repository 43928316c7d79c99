"""Coupling matrices B(x): condition (C), degeneracy, irreducibility, kernel/image."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .exprlang import parse, sample
from .torus import TorusGrid

__all__ = [
    "CouplingField",
    "CouplingReport",
    "validate",
    "is_irreducible",
    "left_null_vector",
    "pi_lambda",
    "image_obstruction",
    "ImageObstruction",
]

TOL = 1e-12


def is_irreducible(M) -> bool:
    """True iff the off-diagonal support digraph of ``M`` is strongly connected."""
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    adj = (M != 0.0) & ~np.eye(m, dtype=bool)
    for start in range(m):
        seen = {start}
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(adj[i]):
                if j not in seen:
                    seen.add(int(j))
                    queue.append(int(j))
        if len(seen) < m:
            return False
    return True


def _is_coupling(M, tol=TOL) -> bool:
    off = M - np.diag(np.diag(M))
    return bool(np.all(off <= tol) and np.all(M.sum(axis=1) >= -tol))


def _is_degenerate(M, tol=TOL) -> bool:
    return bool(np.all(np.abs(M.sum(axis=1)) <= tol))


def _check_constant_degenerate_irreducible(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if not _is_coupling(M, TOL * scale):
        raise ValueError("matrix violates the coupling condition (C)")
    if not _is_degenerate(M, TOL * scale):
        raise ValueError("matrix is not degenerate (some row sum is nonzero)")
    if M.shape[0] > 1 and not is_irreducible(M):
        raise ValueError("matrix is not irreducible")
    return M


def left_null_vector(M) -> np.ndarray:
    """Nonnegative ``l`` with ``l^T M = 0`` and ``sum(l) = 1``.

    For a degenerate irreducible coupling matrix the left kernel is
    one-dimensional and spanned by a positive vector.
    """
    M = _check_constant_degenerate_irreducible(M)
    if M.shape[0] == 1:
        return np.ones(1)
    ker = linalg.null_space(M.T, rcond=1e-10)
    if ker.shape[1] != 1:
        raise ValueError(f"left kernel has dimension {ker.shape[1]}, expected 1")
    ell = ker[:, 0]
    ell = ell / ell.sum()
    if np.any(ell < -1e-12):
        raise ValueError("left null vector is not sign-definite")
    return np.clip(ell, 0.0, None) / np.clip(ell, 0.0, None).sum()


def pi_lambda(M, lam: Sequence[float]) -> float:
    """The scalar ``p`` with ``lam - p*1`` in the image of ``M``."""
    ell = left_null_vector(M)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != ell.shape:
        raise ValueError(f"lambda has length {lam.size}, expected {ell.size}")
    return float(ell @ lam / ell.sum())


@dataclass(frozen=True)
class ImageObstruction:
    obstructed: bool
    mu: np.ndarray | None = None
    residual: float | None = None


def image_obstruction(M, a: Sequence[float]) -> ImageObstruction:
    """Componentwise positive vectors are never in the image of a degenerate coupling matrix.

    When ``a`` is not componentwise positive, ``M mu = a`` is solved in least
    squares and the residual is reported (zero residual means ``a`` is in the image).
    """
    M = np.asarray(M, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.all(a > 0):
        return ImageObstruction(True)
    mu, *_ = np.linalg.lstsq(M, a, rcond=None)
    return ImageObstruction(False, mu, float(np.max(np.abs(M @ mu - a))))


@dataclass
class CouplingReport:
    is_coupling: bool
    is_degenerate: bool
    is_irreducible: bool
    beta_min: float
    beta_max: float
    violations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "is_coupling": self.is_coupling,
            "is_degenerate": self.is_degenerate,
            "is_irreducible": self.is_irreducible,
            "beta_min": self.beta_min,
            "beta_max": self.beta_max,
            "violations": list(self.violations),
        }


class CouplingField:
    """Per-node m x m coupling matrices sampled from expressions or constants.

    ``matrices`` has shape ``(*grid.shape, m, m)``.
    """

    def __init__(self, grid: TorusGrid, entries):
        self.grid = grid
        self.entries = [list(row) for row in entries]
        m = len(self.entries)
        if any(len(row) != m for row in self.entries):
            raise ValueError("coupling entries must form a square m x m table")
        self.m = m
        coords = grid.coords()
        mats = np.empty(grid.shape + (m, m))
        const = True
        for i, row in enumerate(self.entries):
            for j, entry in enumerate(row):
                if isinstance(entry, str):
                    vals = sample(parse(entry, grid.dim), coords)
                else:
                    vals = np.full(grid.shape, float(entry))
                mats[..., i, j] = vals
                const &= bool(np.all(vals == vals.flat[0]))
        self.matrices = mats
        self.is_constant = const
        self.report = validate(self)

    @classmethod
    def constant(cls, grid: TorusGrid, M) -> "CouplingField":
        return cls(grid, np.asarray(M, dtype=float).tolist())

    @property
    def is_coupling(self) -> bool:
        return self.report.is_coupling

    @property
    def is_degenerate_everywhere(self) -> bool:
        return self.report.is_degenerate

    @property
    def is_irreducible_everywhere(self) -> bool:
        return self.report.is_irreducible

    @property
    def beta_min(self) -> float:
        return self.report.beta_min

    @property
    def beta_max(self) -> float:
        return self.report.beta_max

    @property
    def max_diagonal(self) -> float:
        return float(np.max(np.diagonal(self.matrices, axis1=-2, axis2=-1)))

    def constant_matrix(self) -> np.ndarray:
        if not self.is_constant:
            raise ValueError("coupling matrix depends on x; a constant matrix is required")
        return self.matrices.reshape(-1, self.m, self.m)[0].copy()

    def with_discount(self, delta: float) -> "CouplingField":
        """Copy with ``B + delta*I`` (row sums become ``delta``)."""
        out = object.__new__(CouplingField)
        out.grid, out.m, out.entries = self.grid, self.m, self.entries
        out.matrices = self.matrices + delta * np.eye(self.m)
        out.is_constant = self.is_constant
        out.report = validate(out)
        return out


def validate(cf: CouplingField) -> CouplingReport:
    """Check (C), degeneracy and irreducibility node by node."""
    mats = cf.matrices.reshape(-1, cf.m, cf.m)
    violations = []
    coupling = degenerate = irreducible = True
    scale = max(1.0, float(np.abs(mats).max()))
    tol = TOL * scale
    for node, M in enumerate(mats):
        off = M - np.diag(np.diag(M))
        rows = M.sum(axis=1)
        cond = None
        if np.any(off > tol):
            cond = "positive off-diagonal entry"
            coupling = False
        elif np.any(rows < -tol):
            cond = "row sum < 0"
            coupling = False
        if np.any(np.abs(rows) > tol):
            degenerate = False
        if cf.m > 1 and not is_irreducible(M):
            irreducible = False
            cond = cond or "not irreducible"
        if cond is not None:
            violations.append({"node": node, "condition": cond})
    diag = np.diagonal(mats, axis1=-2, axis2=-1)
    return CouplingReport(
        is_coupling=coupling,
        is_degenerate=degenerate,
        is_irreducible=irreducible,
        beta_min=float(diag.min()),
        beta_max=float(np.abs(mats).max()),
        violations=violations,
    )
