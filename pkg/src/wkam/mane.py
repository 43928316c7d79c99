"""Columns of the Mañé matrix as maximal pinned critical subsolutions."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .semigroup import NumericalError, Stepper, subsolution_test
from .system import SolverParams, WeaklyCoupledSystem

__all__ = ["ManeColumn", "mane_column", "mane_pair", "ColumnCache", "default_tol_tri"]

logger = logging.getLogger(__name__)


def default_tol_tri(system: WeaklyCoupledSystem, params: SolverParams) -> float:
    return 5.0 * params.first_order_scale(system.grid)


@dataclass
class ManeColumn:
    """``values[i]`` approximates ``Phi_{i,j}(y, .)`` for base component ``j`` and node ``y``."""

    base_component: int
    base_node: int
    values: np.ndarray
    residual: float
    pin_violation: float
    iterations: int
    decrement: float
    tolerance: float
    warnings: list = field(default_factory=list)

    def at(self, i: int, node: int) -> float:
        return float(self.values.reshape(self.values.shape[0], -1)[i, node])

    def to_dict(self) -> dict:
        return {
            "base_component": self.base_component + 1,
            "base_node": self.base_node,
            "residual": self.residual,
            "pin_violation": self.pin_violation,
            "iterations": self.iterations,
            "decrement": self.decrement,
            "tolerance": self.tolerance,
            "warnings": list(self.warnings),
        }


def mane_column(
    system: WeaklyCoupledSystem,
    j: int,
    y: int,
    params: SolverParams,
    tol_rel: float | None = None,
    stepper: Stepper | None = None,
) -> ManeColumn:
    """Obstacle iteration ``u <- min(u, S_h(dt) u)`` from the cap, with ``u_j(y) = 0``.

    ``system`` must be renormalized to critical level 0; ``j`` is 0-based and
    ``y`` is a flat node index.
    """
    grid = system.grid
    if not 0 <= j < system.m:
        raise ValueError(f"base component {j} out of range")
    if not 0 <= y < grid.size:
        raise ValueError(f"base node {y} out of range")
    stepper = stepper or Stepper(system, params)
    tol_rel = params.tol_fixed if tol_rel is None else tol_rel
    u0 = np.full((system.m, grid.size), params.cap)
    u0[j, y] = 0.0
    u, it, dec = stepper.obstacle(u0, (j, y), tol_rel, params.max_iter)
    flat = u.reshape(system.m, -1)
    capped = np.argwhere(flat >= 0.5 * params.cap)
    if len(capped):
        raise NumericalError(
            "nodes unreachable from the base point remain at the cap",
            nodes=[[int(i), int(k)] for i, k in capped[:50]],
            count=int(len(capped)),
        )
    tol = tol_rel * (1.0 + float(np.abs(flat).max()))
    if not dec <= tol:
        raise NumericalError("obstacle iteration did not converge", decrement=dec, iterations=it)
    stepped = stepper.step(u).reshape(system.m, -1)
    pin_violation = max(0.0, -float(stepped[j, y]))
    margin = float(np.min(stepped - flat))
    notes = []
    if pin_violation > 10 * tol:
        msg = f"pin violation {pin_violation:.3g} exceeds 10*tol; the critical value may be underestimated"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return ManeColumn(j, y, u, margin, pin_violation, it, dec, tol, notes)


class ColumnCache:
    """Mañé columns keyed by (system fingerprint, dt, base component, base node)."""

    def __init__(self, system: WeaklyCoupledSystem, params: SolverParams, tol_rel: float | None = None):
        self.system = system
        self.params = params
        self.tol_rel = tol_rel
        self.key = (system.fingerprint(), params.dt, params.n_q)
        self._stepper = None
        self._store: dict = {}

    @property
    def stepper(self) -> Stepper:
        if self._stepper is None:
            self._stepper = Stepper(self.system, self.params)
        return self._stepper

    def get(self, j: int, y: int) -> ManeColumn:
        k = (self.key, j, y)
        if k not in self._store:
            self._store[k] = mane_column(self.system, j, y, self.params, self.tol_rel, self.stepper)
        return self._store[k]

    def put(self, col: ManeColumn) -> None:
        self._store[(self.key, col.base_component, col.base_node)] = col

    def __contains__(self, jy) -> bool:
        return (self.key,) + tuple(jy) in self._store

    def __len__(self) -> int:
        return len(self._store)


def mane_pair(system: WeaklyCoupledSystem, y: int, z: int, params: SolverParams, cache: ColumnCache | None = None) -> np.ndarray:
    """Matrix ``Phi_{i,j}(y, z)``."""
    cache = cache or ColumnCache(system, params)
    out = np.empty((system.m, system.m))
    for j in range(system.m):
        col = cache.get(j, y)
        for i in range(system.m):
            out[i, j] = col.at(i, z)
    return out


def column_subsolution_margin(col: ManeColumn, system: WeaklyCoupledSystem, params: SolverParams) -> float:
    return subsolution_test(col.values, system, 0.0, params)
