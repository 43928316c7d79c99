"""Closed-form convex Hamiltonians and their Legendre transforms.

Two families, both of the form ``F(x, p) - V(x) + s`` with ``F(x, 0) = 0``:

* ``eikonal``: ``F = a(x) |p|``; the Lagrangian is ``V - s`` on ``|q| <= a(x)``, ``+inf`` outside.
* ``power``:   ``F = (a(x) |p|)**alpha / alpha``; ``L = (|q|/a)**beta / beta + V - s``
  with ``1/alpha + 1/beta = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .exprlang import Expr, parse, sample
from .torus import TorusGrid

__all__ = ["HamiltonianSpec", "eval_H", "eval_L", "velocity_bound", "FAMILIES"]

FAMILIES = ("eikonal", "power")


@dataclass(frozen=True)
class HamiltonianSpec:
    family: str = "eikonal"
    a: str = "1"
    V: str = "0"
    alpha: float = 2.0
    shift: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown Hamiltonian family {self.family!r}")
        if self.family == "power" and not self.alpha > 1.0:
            raise ValueError(f"power family needs alpha > 1, got {self.alpha}")

    @property
    def beta(self) -> float:
        return self.alpha / (self.alpha - 1.0)

    @property
    def strictly_convex(self) -> bool:
        return self.family == "power"

    def shifted(self, delta: float) -> "HamiltonianSpec":
        """Spec for ``H + delta``."""
        return replace(self, shift=self.shift + delta)

    def expr(self, which: str, dim: int) -> Expr:
        return parse(str(getattr(self, which)), dim)

    def sample(self, grid: TorusGrid) -> tuple[np.ndarray, np.ndarray]:
        """Speed and potential on the grid nodes; checks ``a > 0``."""
        coords = grid.coords()
        a = sample(self.expr("a", grid.dim), coords)
        V = sample(self.expr("V", grid.dim), coords)
        if not np.all(a > 0):
            raise ValueError(f"speed a(x) must be positive on the grid (min {a.min()})")
        return a, V

    def mu(self, grid: TorusGrid) -> float:
        """``min_{x,p} H``, attained at ``p = 0``."""
        _, V = self.sample(grid)
        return self.shift - float(V.max())


def _point_values(spec: HamiltonianSpec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = float(np.asarray(sample(spec.expr("a", x.size), [np.array(v) for v in x])))
    V = float(np.asarray(sample(spec.expr("V", x.size), [np.array(v) for v in x])))
    return a, V


def eval_H(spec: HamiltonianSpec, x, p) -> float:
    a, V = _point_values(spec, x)
    r = float(np.linalg.norm(np.atleast_1d(p)))
    if spec.family == "eikonal":
        F = a * r
    else:
        F = (a * r) ** spec.alpha / spec.alpha
    return F - V + spec.shift


def eval_L(spec: HamiltonianSpec, x, q) -> float:
    a, V = _point_values(spec, x)
    r = float(np.linalg.norm(np.atleast_1d(q)))
    if spec.family == "eikonal":
        return V - spec.shift if r <= a else math.inf
    return (r / a) ** spec.beta / spec.beta + V - spec.shift


def velocity_bound(spec: HamiltonianSpec, p_max: float, grid: TorusGrid) -> float:
    """Largest ``|dH/dp|`` over ``|p| <= p_max``: the control radius needed."""
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    a, _ = spec.sample(grid)
    if spec.family == "eikonal":
        return float(a.max())
    return float(np.max(a * (a * p_max) ** (spec.alpha - 1.0)))


def momentum_at_level(spec: HamiltonianSpec, level: float, grid: TorusGrid) -> float:
    """Largest ``|p|`` with ``H(x, p) <= level`` for some node ``x``."""
    a, V = spec.sample(grid)
    room = np.maximum(level + V - spec.shift, 0.0)
    if spec.family == "eikonal":
        return float(np.max(room / a))
    return float(np.max((spec.alpha * room) ** (1.0 / spec.alpha) / a))
