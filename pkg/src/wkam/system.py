"""A weakly coupled system on a grid, plus the discretization parameters."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .coupling import CouplingField
from .hamiltonian import HamiltonianSpec, momentum_at_level, velocity_bound
from .torus import TorusGrid

__all__ = ["WeaklyCoupledSystem", "SolverParams", "oscillation_bound"]


class WeaklyCoupledSystem:
    """Hamiltonians ``H_1..H_m`` and coupling field ``B(x)`` on one torus grid."""

    def __init__(self, grid: TorusGrid, hamiltonians, coupling: CouplingField, scalar: bool = False):
        hamiltonians = tuple(hamiltonians)
        if coupling.grid != grid:
            raise ValueError("coupling field lives on a different grid")
        if len(hamiltonians) != coupling.m:
            raise ValueError(f"{len(hamiltonians)} Hamiltonians for an {coupling.m}x{coupling.m} coupling")
        if coupling.m < 2 and not scalar:
            raise ValueError("m >= 2 required unless scalar (oracle) mode is requested")
        self.grid = grid
        self.hamiltonians = hamiltonians
        self.coupling = coupling
        self.scalar = scalar
        self.m = coupling.m
        sampled = [h.sample(grid) for h in hamiltonians]
        self.speed = np.stack([s[0] for s in sampled])
        self.potential = np.stack([s[1] for s in sampled])
        self.shift = np.array([h.shift for h in hamiltonians], dtype=float)
        self.family = np.array([0 if h.family == "eikonal" else 1 for h in hamiltonians], dtype=np.int64)
        self.alpha = np.array([h.alpha for h in hamiltonians], dtype=float)

    @classmethod
    def build(cls, grid, hamiltonians, coupling, scalar=False) -> "WeaklyCoupledSystem":
        if not isinstance(coupling, CouplingField):
            coupling = CouplingField(grid, coupling)
        return cls(grid, hamiltonians, coupling, scalar=scalar)

    def check(self) -> None:
        """Raise if the coupling violates the standing hypotheses."""
        rep = self.coupling.report
        if not rep.is_coupling:
            raise ValueError("B(x) violates condition (C) at some node")
        if not rep.is_degenerate:
            raise ValueError("B(x) is not degenerate at some node")
        if self.m > 1 and not rep.is_irreducible:
            raise ValueError("B(x) is not irreducible at some node")

    def shifted(self, delta) -> "WeaklyCoupledSystem":
        """System with ``H_i + delta_i`` (``delta`` scalar or length-m)."""
        delta = np.broadcast_to(np.asarray(delta, dtype=float), (self.m,))
        hs = [h.shifted(float(d)) for h, d in zip(self.hamiltonians, delta)]
        return WeaklyCoupledSystem(self.grid, hs, self.coupling, scalar=self.scalar)

    def renormalized(self, c: float) -> "WeaklyCoupledSystem":
        """``H_i <- H_i - c`` so that the critical level becomes 0."""
        return self.shifted(-c)

    def with_coupling(self, coupling: CouplingField) -> "WeaklyCoupledSystem":
        return WeaklyCoupledSystem(self.grid, self.hamiltonians, coupling, scalar=self.scalar)

    @property
    def strictly_convex(self) -> bool:
        return all(h.strictly_convex for h in self.hamiltonians)

    def mu(self) -> float:
        return min(self.shift - self.potential.reshape(self.m, -1).max(axis=1))

    def level_upper_bound(self) -> float:
        """The null function is a subsolution at this level, so ``c`` is at most it."""
        return float(np.max(self.shift[:, None] - self.potential.reshape(self.m, -1)))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for arr in (self.speed, self.potential, self.shift, self.family, self.alpha, self.coupling.matrices):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(repr((self.grid.dim, self.grid.n)).encode())
        return h.hexdigest()[:16]


def oscillation_bound(system: WeaklyCoupledSystem, level: float) -> float | None:
    """Bound on ``max_ij ||u_i - u_j||`` for subsolutions at ``level`` (m = 2 only).

    From ``(B u)_i <= level - mu`` and degeneracy: ``|u_1 - u_2| <= (level - mu)/beta_min``.
    """
    if system.m != 2:
        return None
    return max(level - system.mu(), 0.0) / system.coupling.beta_min


@dataclass(frozen=True)
class SolverParams:
    """Time step, control lattice and iteration controls of the discrete semigroup.

    The control lattice of component ``i`` is ``{k * Q[i] / n_q[i] : |k| <= n_q[i]}``
    per axis.  ``kernel`` selects the transport implementation: ``"exact1d"``
    (fast, 1D only, same minimum as the lattice scan) or ``"lattice"``
    (brute-force scan of every control).
    """

    dt: float
    Q: tuple
    n_q: tuple
    cap: float = 1e6
    tol_fixed: float = 1e-9
    max_iter: int = 2_000_000
    kernel: str = "auto"
    check_stability: bool = field(default=True, compare=False)

    @classmethod
    def for_system(cls, system: WeaklyCoupledSystem, dt=None, n_q=None, p_max=None, **kw) -> "SolverParams":
        grid = system.grid
        h = grid.h
        if dt is None:
            bmax = system.coupling.max_diagonal
            bound = 0.9 * min(h, 1.0 / bmax if bmax > 0 else h)
            dt = 1.0 / math.ceil(1.0 / bound)
        if p_max is None:
            p_max = default_p_max(system)
        Q = tuple(velocity_bound(hs, p_max, grid) for hs in system.hamiltonians)
        if n_q is None:
            n_q = tuple(max(1, math.ceil(q / h - 1e-9)) for q in Q)
        elif np.ndim(n_q) == 0:
            n_q = (int(n_q),) * system.m
        return cls(dt=float(dt), Q=Q, n_q=tuple(int(v) for v in n_q), **kw)

    def with_(self, **kw) -> "SolverParams":
        return replace(self, **kw)

    def first_order_scale(self, grid: TorusGrid) -> float:
        return grid.h + self.dt

    def steps_for(self, T: float) -> int:
        k = round(T / self.dt)
        if abs(k * self.dt - T) > 1e-9 * max(1.0, T):
            raise ValueError(f"horizon {T} is not an integer multiple of dt={self.dt}")
        return int(k)

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "Q": list(self.Q),
            "n_q": list(self.n_q),
            "cap": self.cap,
            "tol_fixed": self.tol_fixed,
            "kernel": self.kernel,
        }


def default_p_max(system: WeaklyCoupledSystem) -> float:
    """Gradient bound for subsolutions below the level where 0 is a subsolution.

    ``H_i(x, Du_i) <= level - (B u)_i <= level + (m-1) beta_max osc`` with the
    oscillation bound of :func:`oscillation_bound` (or the level gap when m > 2).
    """
    level = system.level_upper_bound()
    osc = oscillation_bound(system, level)
    if osc is None:
        osc = max(level - system.mu(), 0.0) / max(system.coupling.beta_min, 1e-12)
    slack = (system.m - 1) * system.coupling.beta_max * osc
    p = max(momentum_at_level(h, level + slack, system.grid) for h in system.hamiltonians)
    return max(p, 1.0)
