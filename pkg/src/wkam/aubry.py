"""Aubry set detection and the rigidity diagnostics that hold on it.

The indicator of a base node ``y`` is

    sigma(y) = || S_h(T) phi - phi ||_inf,   phi = Mañé column based at (j, y),

which vanishes exactly when the column is a discrete critical solution.  Off the
Aubry set ``sigma`` grows only like a power of the distance (cubically for the
eikonal examples, quadratically for quadratic Hamiltonians), so a first-order
threshold ``C_A (h + dt)`` cannot localize the set.  Flags therefore use a
noise floor: the column is converged to a relative tolerance ``tol``, each
step of the horizon can move it by at most that much, and an error ``e`` in the
critical value adds ``e * T``.  The first-order threshold only decides where the
coarse scan is refined.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .mane import ColumnCache, ManeColumn, mane_column
from .semigroup import Stepper, subsolution_test
from .system import SolverParams, WeaklyCoupledSystem
from .torus import write_grid_csv

__all__ = [
    "AubryReport",
    "AubryNode",
    "aubry_indicator",
    "detect_aubry",
    "rigidity_check",
    "antisymmetry_report",
    "comparison_check",
    "gradient_agreement",
    "ComparisonVerdict",
    "default_tol_rig",
]

logger = logging.getLogger(__name__)

COARSE_TOL = 1e-9
FINE_TOL = 1e-14


def default_tol_rig(system: WeaklyCoupledSystem, params: SolverParams) -> float:
    return 5.0 * params.first_order_scale(system.grid)


@dataclass
class Indicator:
    node: int
    sigma: float
    noise: float
    column: ManeColumn

    @property
    def flagged(self) -> bool:
        return self.sigma <= self.noise


def _indicator(system, params, stepper, j, y, tol_rel, T_test, C_A, c_uncertainty) -> Indicator:
    col = mane_column(system, j, y, params, tol_rel=tol_rel, stepper=stepper)
    K = params.steps_for(T_test)
    evolved = stepper.evolve_steps(col.values, K)
    sigma = float(np.abs(evolved - col.values).max())
    noise = C_A * (K * col.tolerance + T_test * c_uncertainty)
    return Indicator(y, sigma, noise, col)


def aubry_indicator(
    system: WeaklyCoupledSystem,
    y: int,
    params: SolverParams,
    T_test: float = 1.0,
    base_component: int = 0,
    tol_rel: float = FINE_TOL,
    stepper: Stepper | None = None,
) -> float:
    """``sigma(y)`` for the renormalized system."""
    stepper = stepper or Stepper(system, params)
    return _indicator(system, params, stepper, base_component, y, tol_rel, T_test, 1.0, 0.0).sigma


# -- worker plumbing: one stepper per process, results keyed by node ----------

_WORKER = {}


def _worker_init(system, params):
    _WORKER["system"] = system
    _WORKER["params"] = params
    _WORKER["stepper"] = Stepper(system, params)


def _worker_job(args):
    j, y, tol_rel, T_test, C_A, c_unc = args
    ind = _indicator(_WORKER["system"], _WORKER["params"], _WORKER["stepper"], j, y, tol_rel, T_test, C_A, c_unc)
    return ind


class _Evaluator:
    def __init__(self, system, params, workers, T_test, C_A, c_uncertainty):
        self.system, self.params = system, params
        self.T_test, self.C_A, self.c_unc = T_test, C_A, c_uncertainty
        self.workers = max(1, int(workers))
        self._pool = None
        self._stepper = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(
                self.workers, initializer=_worker_init, initargs=(self.system, self.params)
            )
        else:
            self._stepper = Stepper(self.system, self.params)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()

    def run(self, j, nodes, tol_rel) -> dict:
        nodes = sorted(set(int(y) for y in nodes))
        jobs = [(j, y, tol_rel, self.T_test, self.C_A, self.c_unc) for y in nodes]
        if self._pool is not None:
            results = list(self._pool.map(_worker_job, jobs))
        else:
            results = [
                _indicator(self.system, self.params, self._stepper, *job) for job in jobs
            ]
        return {r.node: r for r in results}


def _neighbourhood(grid, y, radius) -> list[int]:
    idx = np.unravel_index(y, grid.shape)
    offsets = np.arange(-radius, radius + 1)
    out = []
    for off in np.array(np.meshgrid(*([offsets] * grid.dim), indexing="ij")).reshape(grid.dim, -1).T:
        out.append(int(np.ravel_multi_index(tuple((np.array(idx) + off) % grid.n), grid.shape)))
    return out


def _coarse_nodes(grid, stride) -> list[int]:
    axes = [np.arange(0, grid.n, stride)] * grid.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return sorted(int(k) for k in np.ravel_multi_index(tuple(m.ravel() for m in mesh), grid.shape))


def _is_local_min(grid, y, sigma, stride) -> bool:
    for z in _neighbourhood(grid, y, stride):
        if z != y and z in sigma and sigma[z] < sigma[y]:
            return False
    return True


@dataclass
class AubryNode:
    index: int
    coords: list
    sigma: float
    rigidity_dev: float | None = None
    antisym_defect: float | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "coords": self.coords,
            "sigma": self.sigma,
            "rigidity_dev": self.rigidity_dev,
            "antisym_defect": self.antisym_defect,
        }


@dataclass
class AubryReport:
    threshold: float
    first_order_tol: float
    base_component: int
    T_test: float
    sigma: dict
    nodes: list
    off_set_sums: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    consistency: dict | None = None
    columns: ColumnCache | None = field(default=None, repr=False)

    @property
    def flagged(self) -> list[int]:
        return [nd.index for nd in self.nodes]

    def to_dict(self) -> dict:
        out = {
            "threshold": self.threshold,
            "first_order_tol": self.first_order_tol,
            "base_component": self.base_component + 1,
            "T_test": self.T_test,
            "nodes": [nd.to_dict() for nd in self.nodes],
            "evaluated": len(self.sigma),
            "off_set_sums": self.off_set_sums,
            "warnings": list(self.warnings),
        }
        if self.consistency is not None:
            out["consistency"] = self.consistency
        return out

    def sigma_grid(self, grid) -> np.ndarray:
        """``sigma`` on every node (NaN where it was not evaluated)."""
        out = np.full(grid.size, np.nan)
        for y, s in self.sigma.items():
            out[y] = s
        return out.reshape(grid.shape)

    def write_sigma_csv(self, path, grid) -> None:
        write_grid_csv(path, grid, self.sigma_grid(grid)[None])


def detect_aubry(
    system: WeaklyCoupledSystem,
    params: SolverParams,
    stride: int = 4,
    T_test: float = 1.0,
    C_A: float = 10.0,
    c_uncertainty: float = 0.0,
    base_component: int = 0,
    coarse_tol: float = COARSE_TOL,
    fine_tol: float = FINE_TOL,
    workers: int = 1,
    diagnostics: bool = True,
    consistency: bool = False,
) -> AubryReport:
    """Coarse-then-refine scan of ``sigma`` over the grid nodes.

    ``system`` must be renormalized; ``c_uncertainty`` is the uncertainty of
    that renormalization and widens the noise floor accordingly.
    """
    grid = system.grid
    first_order = C_A * params.first_order_scale(grid)
    stride = max(1, min(int(stride), grid.n))
    notes = []
    with _Evaluator(system, params, workers, T_test, C_A, c_uncertainty) as ev:
        coarse = ev.run(base_component, _coarse_nodes(grid, stride), coarse_tol)
        sig_c = {y: r.sigma for y, r in coarse.items()}
        argmin = min(sig_c, key=lambda y: (sig_c[y], y))
        seeds = {argmin}
        for y, r in coarse.items():
            if r.flagged or (r.sigma <= first_order and _is_local_min(grid, y, sig_c, stride)):
                seeds.add(y)
        todo = set()
        for y in seeds:
            todo.update(_neighbourhood(grid, y, stride - 1) if stride > 1 else [y])
        fine: dict = {}
        # grow the refined region until every flagged node has evaluated neighbours
        while todo:
            fine.update(ev.run(base_component, todo, fine_tol))
            todo = set()
            for y, r in fine.items():
                if r.flagged:
                    todo.update(z for z in _neighbourhood(grid, y, 1) if z not in fine)
        sigma = dict(sig_c)
        sigma.update({y: r.sigma for y, r in fine.items()})
        threshold = max(r.noise for r in fine.values())
        flagged = sorted(y for y, r in fine.items() if r.sigma <= threshold)
        if not flagged:
            best = min(fine, key=lambda y: (fine[y].sigma, y))
            msg = (
                f"no node below the threshold {threshold:.3g}; flagging argmin sigma "
                f"(node {best}, sigma {fine[best].sigma:.3g})"
            )
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            flagged = [best]
        cache = ColumnCache(system, params, tol_rel=fine_tol)
        for r in fine.values():
            cache.put(r.column)
        nodes = [AubryNode(y, list(grid.node_coords(y)), fine[y].sigma) for y in flagged]
        consist = None
        if consistency and system.m > 1:
            other = 1 if base_component == 0 else 0
            alt = ev.run(other, fine.keys(), fine_tol)
            alt_thr = max(r.noise for r in alt.values())
            alt_flag = sorted(y for y, r in alt.items() if r.sigma <= alt_thr)
            consist = {
                "base_component": other + 1,
                "flagged": alt_flag,
                "symmetric_difference": sorted(set(alt_flag) ^ set(flagged)),
            }
            for r in alt.values():
                cache.put(r.column)
    off_sums = []
    if diagnostics:
        for nd in nodes:
            cols = [cache.get(j, nd.index).values for j in range(system.m)]
            nd.rigidity_dev = rigidity_check([nd.index], cols) if system.m > 1 else 0.0
            nd.antisym_defect = antisymmetry_report(system, [nd.index], cache)[0]["defect"]
        # off-set sums at refined but unflagged nodes, reported without a sign claim
        others = sorted(y for y in fine if y not in flagged)[:8]
        if system.m > 1:
            off_sums = antisymmetry_report(system, others, cache)
    return AubryReport(
        threshold=threshold,
        first_order_tol=first_order,
        base_component=base_component,
        T_test=T_test,
        sigma=sigma,
        nodes=nodes,
        off_set_sums=off_sums,
        warnings=notes,
        consistency=consist,
        columns=cache,
    )


def rigidity_check(nodes, subsolutions) -> float:
    """Max over nodes and pairs of the spread of ``v - w`` around its component mean."""
    subs = [np.asarray(v, dtype=float) for v in subsolutions]
    if len(subs) < 2:
        raise ValueError("rigidity check needs at least two subsolutions")
    m = subs[0].shape[0]
    flat = [v.reshape(m, -1) for v in subs]
    worst = 0.0
    for y in nodes:
        for a in range(len(flat)):
            for b in range(a + 1, len(flat)):
                d = flat[a][:, y] - flat[b][:, y]
                worst = max(worst, float(np.abs(d - d.mean()).max()))
    return worst


def antisymmetry_report(system: WeaklyCoupledSystem, nodes, cache: ColumnCache) -> list[dict]:
    """Per node: ``max_{i<j} |Phi_ij(y,y) + Phi_ji(y,y)|`` and the smallest such sum."""
    out = []
    for y in nodes:
        phi = np.empty((system.m, system.m))
        for j in range(system.m):
            col = cache.get(j, y)
            for i in range(system.m):
                phi[i, j] = col.at(i, y)
        sums = [phi[i, j] + phi[j, i] for i in range(system.m) for j in range(i + 1, system.m)]
        out.append(
            {
                "index": int(y),
                "defect": float(max(abs(s) for s in sums)) if sums else 0.0,
                "min_sum": float(min(sums)) if sums else 0.0,
                "diagonal": float(np.abs(np.diag(phi)).max()),
            }
        )
    return out


@dataclass
class ComparisonVerdict:
    verdict: str
    violation: float
    hypothesis_gap: float
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "violation": self.violation,
            "hypothesis_gap": self.hypothesis_gap,
            "reason": self.reason,
        }


def comparison_check(
    system: WeaklyCoupledSystem,
    v,
    u,
    nodes,
    params: SolverParams,
    tol: float,
    residual_tol: float | None = None,
) -> ComparisonVerdict:
    """``v <= u`` at one index per flagged node implies ``v <= u`` everywhere.

    Returns ``inconclusive`` when ``v`` fails the subsolution test, ``u`` is not
    stationary, or the hypothesis on the flagged nodes does not hold.
    """
    m = system.m
    v = np.asarray(v, dtype=float).reshape(m, -1)
    u = np.asarray(u, dtype=float).reshape(m, -1)
    residual_tol = tol if residual_tol is None else residual_tol
    margin = subsolution_test(v, system, 0.0, params)
    if margin < -residual_tol:
        return ComparisonVerdict("inconclusive", float("nan"), float("nan"), f"v is not a subsolution (margin {margin:.3g})")
    stepper = Stepper(system, params)
    resid = float(np.abs(stepper.step(u).reshape(m, -1) - u).max())
    if resid > residual_tol:
        return ComparisonVerdict("inconclusive", float("nan"), float("nan"), f"u is not stationary (residual {resid:.3g})")
    nodes = list(nodes)
    if not nodes:
        return ComparisonVerdict("inconclusive", float("nan"), float("nan"), "empty Aubry set")
    gap = max(float(np.min(v[:, y] - u[:, y])) for y in nodes)
    violation = float(np.max(v - u))
    if gap > tol:
        return ComparisonVerdict("inconclusive", violation, gap, "hypothesis fails on the flagged set")
    verdict = "pass" if violation <= 5 * tol else "fail"
    return ComparisonVerdict(verdict, violation, gap)


def gradient_agreement(system: WeaklyCoupledSystem, y: int, subsolutions) -> float:
    """Radius of the smallest ball meeting every one-sided gradient box at ``y``.

    Diagnostic only.  Each subsolution contributes, per component and axis, the
    interval spanned by its backward and forward difference quotients.
    """
    if not system.strictly_convex:
        raise ValueError("gradient agreement needs strictly convex Hamiltonians (power family)")
    grid = system.grid
    m = system.m
    idx = np.unravel_index(int(y), grid.shape)
    radius = 0.0
    for i in range(m):
        gaps = []
        for ax in range(grid.dim):
            lo_ends, hi_ends = [], []
            for v in subsolutions:
                f = np.asarray(v, dtype=float).reshape((m,) + grid.shape)[i]
                fwd = list(idx)
                bwd = list(idx)
                fwd[ax] = (idx[ax] + 1) % grid.n
                bwd[ax] = (idx[ax] - 1) % grid.n
                qf = (f[tuple(fwd)] - f[idx]) / grid.h
                qb = (f[idx] - f[tuple(bwd)]) / grid.h
                lo_ends.append(min(qf, qb))
                hi_ends.append(max(qf, qb))
            gaps.append(max(0.0, max(lo_ends) - min(hi_ends)) / 2.0)
        radius = max(radius, float(np.sqrt(np.sum(np.square(gaps)))))
    return radius
