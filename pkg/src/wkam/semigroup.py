"""Monotone semi-Lagrangian approximation of the evolution semigroup.

One step of size ``dt`` for ``u_t + H_i(x, D u_i) + (B(x) u)_i = 0`` is a Lie
splitting:

1. transport, per component and node::

       ut_i(x) = min_{q in lattice} interp(u_i)(x - dt q) + dt L_i(x, q)

2. coupling: ``u'(x) = (I - dt B(x)) ut(x)``.

Under ``dt * max b_ii <= 1`` the coupling matrix ``I - dt B`` is nonnegative
with unit row sums, so the step is monotone, sup-norm nonexpansive and commutes
with adding constants in ``R 1``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .system import SolverParams, WeaklyCoupledSystem
from .torus import lipschitz_estimate

__all__ = [
    "Stepper",
    "NumericalError",
    "step",
    "evolve",
    "subsolution_test",
    "Trajectory",
    "control_lattice",
]

logger = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-finite values, divergence, no convergence)."""

    def __init__(self, message: str, **payload):
        super().__init__(message)
        self.payload = {"error": message, **payload}


def control_lattice(Q: float, n_q: int, dim: int) -> np.ndarray:
    """Integer lattice ``k`` (controls ``k*Q/n_q``), sorted by ``|q|`` then lexicographically."""
    ks = np.array(list(itertools.product(range(-n_q, n_q + 1), repeat=dim)), dtype=np.int64)
    order = np.lexsort(tuple(ks[:, d] for d in reversed(range(dim))) + ((ks**2).sum(axis=1),))
    return ks[order]


class Stepper:
    """Precomputed discrete semigroup ``S_h(dt)`` for one system and parameter set."""

    def __init__(self, system: WeaklyCoupledSystem, params: SolverParams):
        self.system = system
        self.params = params
        grid = system.grid
        bdiag = system.coupling.max_diagonal
        if params.check_stability and params.dt * bdiag > 1.0 + 1e-12:
            raise ValueError(
                f"unstable coupling substep: dt*max b_ii = {params.dt * bdiag:.6g} > 1"
            )
        if len(params.Q) != system.m or len(params.n_q) != system.m:
            raise ValueError("solver parameters do not match the number of components")
        kernel = params.kernel
        if kernel == "auto":
            kernel = "exact1d" if grid.dim == 1 else "lattice"
        if kernel == "exact1d" and grid.dim != 1:
            raise ValueError("the exact1d kernel only supports 1D grids")
        if kernel not in ("exact1d", "lattice"):
            raise ValueError(f"unknown kernel {kernel!r}")
        self.kernel = kernel
        m = system.m
        mats = system.coupling.matrices.reshape(-1, m, m)
        self.P = np.ascontiguousarray(np.eye(m)[None] - params.dt * mats)
        self._flat_shape = (m, grid.size)
        self._args = (
            system.family,
            system.alpha,
            np.ascontiguousarray(system.speed.reshape(m, -1)),
            np.ascontiguousarray(system.potential.reshape(m, -1)),
            system.shift,
            float(params.dt),
            float(grid.h),
            np.asarray(params.n_q, dtype=np.int64),
            np.asarray(params.Q, dtype=float),
            self.P,
        )
        if kernel == "lattice":
            self._prepare_lattice()

    # -- brute-force lattice transport (any dimension) -------------------------

    def _prepare_lattice(self):
        sysm, p = self.system, self.params
        grid = sysm.grid
        n, dim = grid.n, grid.dim
        node_idx = np.indices(grid.shape).reshape(dim, -1).T  # (nodes, dim)
        self._lattice = []
        for i in range(sysm.m):
            dq = p.Q[i] / p.n_q[i]
            c = p.dt * dq / grid.h
            ks = control_lattice(p.Q[i], p.n_q[i], dim)
            sk = ks * c
            off = np.floor(-sk)
            w = -sk - off
            qnorm = np.sqrt((ks.astype(float) ** 2).sum(axis=1)) * dq
            a = sysm.speed[i].ravel()
            V = sysm.potential[i].ravel()
            s = sysm.shift[i]
            if sysm.family[i] == 0:
                feas = qnorm[:, None] <= a[None, :] * (1.0 + _kernels.FEAS_RTOL)
                cost = np.where(feas, p.dt * (V - s)[None, :], np.inf)
            else:
                beta = sysm.alpha[i] / (sysm.alpha[i] - 1.0)
                cost = p.dt * ((qnorm[:, None] / a[None, :]) ** beta / beta + (V - s)[None, :])
            corners = []
            for corner in itertools.product((0, 1), repeat=dim):
                weight = np.ones(len(ks))
                idx = np.zeros((len(ks), node_idx.shape[0]), dtype=np.int64)
                for ax, cbit in enumerate(corner):
                    weight = weight * (w[:, ax] if cbit else 1.0 - w[:, ax])
                    coord = (node_idx[None, :, ax] + off[:, ax, None].astype(np.int64) + cbit) % n
                    idx = idx * n + coord
                corners.append((weight[:, None], idx))
            self._lattice.append((ks * dq, corners, cost))

    def _transport_lattice(self, u, return_controls=False):
        out = np.empty(self._flat_shape)
        controls = []
        for i, (qs, corners, cost) in enumerate(self._lattice):
            ui = u[i]
            if len(corners) == 2:
                (w0, i0), (w1, i1) = corners
                vals = w0 * ui[i0] + w1 * ui[i1]
            else:
                vals = sum(wc * ui[ic] for wc, ic in corners)
            vals = vals + cost
            best = np.argmin(vals, axis=0)  # first hit = smallest |q|, then lexicographic
            out[i] = vals[best, np.arange(vals.shape[1])]
            controls.append(qs[best])
        return (out, controls) if return_controls else out

    # -- public API -------------------------------------------------------------

    def _flat(self, u):
        u = np.asarray(u, dtype=float)
        if u.size != np.prod(self._flat_shape):
            raise ValueError(f"field of shape {u.shape} does not match system {self._flat_shape}")
        return np.ascontiguousarray(u.reshape(self._flat_shape))

    def _unflat(self, u):
        return u.reshape((self.system.m,) + self.system.grid.shape)

    def transport(self, u) -> np.ndarray:
        u = self._flat(u)
        if self.kernel == "exact1d":
            out = np.empty_like(u)
            _kernels.transport_exact1d(u, out, *self._args[:-1])
        else:
            out = self._transport_lattice(u)
        return self._unflat(out)

    def optimal_controls(self, u) -> list[np.ndarray]:
        """Minimizing control per component and node (lattice scan, tie-broken)."""
        if self.kernel != "lattice":
            self._prepare_lattice()
        _, controls = self._transport_lattice(self._flat(u), return_controls=True)
        return controls

    def step(self, u) -> np.ndarray:
        u = self._flat(u)
        if self.kernel == "exact1d":
            out = np.empty_like(u)
            tmp = np.empty_like(u)
            _kernels.step_exact1d(u, out, tmp, *self._args)
        else:
            ut = self._transport_lattice(u)
            out = np.einsum("nik,kn->in", self.P, ut)
        return self._unflat(out)

    def evolve_steps(self, u, nsteps: int) -> np.ndarray:
        u = self._flat(u)
        if nsteps == 0:
            return self._unflat(u.copy())
        if self.kernel == "exact1d":
            out, bad = _kernels.evolve_exact1d(u, int(nsteps), *self._args)
        else:
            out, bad = u, 0
            for k in range(int(nsteps)):
                out = self._flat(self.step(out))
                if not np.all(np.isfinite(out)):
                    bad = k + 1
                    break
        if bad:
            raise NumericalError("non-finite values during evolution", step_index=int(bad))
        return self._unflat(out)

    def obstacle(self, u0, pin, tol_rel, maxit):
        """``u <- min(u, step u)`` with ``u[pin] = 0``; returns (u, iterations, last decrement)."""
        u = self._flat(u0)
        comp, node = pin
        if self.kernel == "exact1d":
            out, it, dec = _kernels.obstacle_exact1d(u, comp, node, tol_rel, maxit, *self._args)
            return self._unflat(out), int(it), float(dec)
        it, dec = 0, np.inf
        while it < maxit:
            nxt = np.minimum(u, self._flat(self.step(u)))
            diff = u - nxt
            diff[comp, node] = 0.0
            dec = float(diff.max())
            nxt[comp, node] = 0.0
            u = nxt
            it += 1
            if dec <= tol_rel * (1.0 + float(np.abs(u).max())):
                break
        return self._unflat(u), it, dec

    def ascend(self, u0, tol_rel, maxit, growth_limit):
        """``u <- max(u, step u)``; returns (u, iterations, last increment)."""
        u = self._flat(u0)
        if self.kernel == "exact1d":
            out, it, inc = _kernels.ascend_exact1d(u, tol_rel, maxit, growth_limit, *self._args)
            return self._unflat(out), int(it), float(inc)
        start = u.copy()
        it, inc = 0, np.inf
        while it < maxit:
            nxt = np.maximum(u, self._flat(self.step(u)))
            inc = float((nxt - u).max())
            u = nxt
            it += 1
            if float((u - start).max()) > growth_limit:
                break
            if inc <= tol_rel * (1.0 + float(np.abs(u).max())):
                break
        return self._unflat(u), it, inc

    def contract(self, u0, tol_abs, maxit):
        """Plain iteration ``u <- step u``; returns (u, iterations, last increment, growth flag)."""
        u = self._flat(u0)
        if self.kernel == "exact1d":
            out, it, delta, grew = _kernels.contract_exact1d(u, tol_abs, maxit, *self._args)
            return self._unflat(out), int(it), float(delta), int(grew)
        it, delta, prev, grew = 0, np.inf, np.inf, 0
        while it < maxit:
            nxt = self._flat(self.step(u))
            delta = float(np.abs(nxt - u).max())
            u = nxt
            it += 1
            grew = grew + 1 if (delta > prev * (1 + 1e-12) and delta > tol_abs) else 0
            prev = delta
            if grew > 50 or delta <= tol_abs:
                break
        return self._unflat(u), it, delta, grew


def step(u, system: WeaklyCoupledSystem, params: SolverParams) -> np.ndarray:
    return Stepper(system, params).step(u)


@dataclass
class Trajectory:
    """Snapshots of an evolution; ``times[k]`` labels ``snapshots[k]``."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    lipschitz: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def evolve(u0, T: float, system: WeaklyCoupledSystem, params: SolverParams, snapshot_times=(), stepper=None) -> Trajectory:
    """Apply ``T/dt`` steps to ``u0``; records ``u0``, requested snapshots and the final state."""
    stepper = stepper or Stepper(system, params)
    K = params.steps_for(T)
    marks = sorted({params.steps_for(t) for t in snapshot_times if 0 < t < T} | {K})
    traj = Trajectory()
    u = np.asarray(u0, dtype=float).reshape((system.m,) + system.grid.shape)
    traj.times.append(0.0)
    traj.snapshots.append(u.copy())
    traj.lipschitz.append(lipschitz_estimate(u, system.grid))
    done = 0
    for mark in marks:
        if mark == 0:
            continue
        try:
            u = stepper.evolve_steps(u, mark - done)
        except NumericalError as err:
            err.payload["step_index"] = done + err.payload.get("step_index", 0)
            raise
        done = mark
        traj.times.append(mark * params.dt)
        traj.snapshots.append(u.copy())
        traj.lipschitz.append(lipschitz_estimate(u, system.grid))
    return traj


def subsolution_test(u, system: WeaklyCoupledSystem, level: float, params: SolverParams) -> float:
    """Margin ``min (S_h(dt) u - u)`` for the system with ``H_i - level``.

    A margin ``>= -tol`` accepts ``u`` as a discrete ``level``-subsolution: the
    map ``t -> S_h(t) u + t*level`` is then non-decreasing.
    """
    shifted = system.shifted(-level)
    u = np.asarray(u, dtype=float).reshape((system.m,) + system.grid.shape)
    return float(np.min(Stepper(shifted, params).step(u) - u))
