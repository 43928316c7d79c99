"""Property suites S1..S7 binding the structural statements to executable checks.

Every entry names one property (``anchor``) and reports pass, fail or
inconclusive with the largest violation and the tolerance it was held to.
Negative controls feed a deliberately broken input and pass when the check
detects the breakage.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .aubry import (
    AubryReport,
    comparison_check,
    detect_aubry,
    rigidity_check,
    antisymmetry_report,
    default_tol_rig,
)
from .critical import CriticalEstimate, estimate_critical_value, solve_critical
from .mane import ColumnCache, default_tol_tri
from .semigroup import Stepper, subsolution_test
from .system import SolverParams, WeaklyCoupledSystem, oscillation_bound, default_p_max
from .torus import TorusGrid, lipschitz_estimate

__all__ = ["SuiteReport", "SuiteEntry", "VerificationContext", "run_suite", "SUITES", "random_lipschitz_field"]

REFINE_TOL = 1e-12


@dataclass
class SuiteEntry:
    property: str
    anchor: str
    status: str
    violation: float
    tolerance: float
    runtime: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "anchor": self.anchor,
            "status": self.status,
            "max_violation": self.violation,
            "tolerance": self.tolerance,
            "runtime": self.runtime,
            "detail": self.detail,
        }


@dataclass
class SuiteReport:
    suite: str
    seed: int
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.status != "fail" for e in self.entries)

    def entry(self, prop: str) -> SuiteEntry:
        for e in self.entries:
            if e.property == prop:
                return e
        raise KeyError(prop)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "passed": self.passed,
            "entries": [e.to_dict() for e in self.entries],
        }


def random_lipschitz_field(rng: np.random.Generator, grid: TorusGrid, m: int, modes: int = 3, amplitude: float = 1.0) -> np.ndarray:
    """Trig polynomial with coefficients decaying like ``1/(1+|k|)^2`` (bounded Lipschitz constant)."""
    coords = grid.coords()
    out = np.zeros((m,) + grid.shape)
    ks = np.array(np.meshgrid(*([np.arange(-modes, modes + 1)] * grid.dim), indexing="ij")).reshape(grid.dim, -1).T
    for i in range(m):
        for k in ks:
            if not np.any(k):
                continue
            phase = 2 * np.pi * sum(kk * x for kk, x in zip(k, coords))
            scale = amplitude / (1.0 + np.linalg.norm(k)) ** 2
            a, b = rng.uniform(-1, 1, size=2) * scale
            out[i] += a * np.cos(phase) + b * np.sin(phase)
    return out


class VerificationContext:
    """Lazily computed artifacts shared across suites for one system."""

    def __init__(
        self,
        system: WeaklyCoupledSystem,
        params: SolverParams,
        seed: int = 0,
        stride: int = 4,
        workers: int = 1,
        critical: CriticalEstimate | None = None,
        aubry: AubryReport | None = None,
    ):
        self.system = system
        self.params = params
        self.seed = int(seed)
        self.stride = stride
        self.workers = workers
        self._critical = critical
        self._aubry = aubry
        self._renorm = None
        self._solution = None
        self._cache = None

    @property
    def scale(self) -> float:
        return self.params.first_order_scale(self.system.grid)

    @property
    def critical(self) -> CriticalEstimate:
        if self._critical is None:
            self._critical = estimate_critical_value(self.system, self.params, refine_tol=REFINE_TOL)
        return self._critical

    @property
    def renormalized(self) -> WeaklyCoupledSystem:
        if self._renorm is None:
            self._renorm = self.system.renormalized(self.critical.c_hat)
        return self._renorm

    @property
    def cache(self) -> ColumnCache:
        if self._cache is None:
            if self._aubry is not None and self._aubry.columns is not None:
                self._cache = self._aubry.columns
            else:
                self._cache = ColumnCache(self.renormalized, self.params)
        return self._cache

    @property
    def aubry(self) -> AubryReport:
        if self._aubry is None:
            self._aubry = detect_aubry(
                self.renormalized,
                self.params,
                stride=self.stride,
                c_uncertainty=self.critical.uncertainty,
                workers=self.workers,
            )
            self._cache = self._aubry.columns
        return self._aubry

    def null_is_subsolution(self) -> bool:
        zero = np.zeros((self.system.m,) + self.system.grid.shape)
        return subsolution_test(zero, self.renormalized, 0.0, self.params) >= -self.params.tol_fixed

    @property
    def solution(self) -> np.ndarray:
        if self._solution is None:
            self._solution = self.solve_from(self.default_seeds()[0])
        return self._solution

    def default_seeds(self) -> list[np.ndarray]:
        """Two distinct critical subsolutions: a Mañé column and the null function when admissible."""
        grid = self.system.grid
        col = self.cache.get(0, grid.size // 2).values
        if self.null_is_subsolution():
            return [np.zeros_like(col), col]
        return [col, self.cache.get(0, grid.size // 4).values]

    def solve_from(self, seed) -> np.ndarray:
        return solve_critical(self.renormalized, seed, self.params).u


def _entry(prop, anchor, violation, tol, t0, negative=False, detail=None, status=None) -> SuiteEntry:
    if status is None:
        ok = violation > tol if negative else violation <= tol
        status = "pass" if ok else "fail"
    return SuiteEntry(prop, anchor, status, float(violation), float(tol), time.perf_counter() - t0, detail or {})


# -- S1: exact scheme axioms ---------------------------------------------------


def suite_s1(ctx: VerificationContext, pairs: int = 100, tol: float = 1e-9) -> list[SuiteEntry]:
    sysm, params = ctx.system, ctx.params
    grid, m = sysm.grid, sysm.m
    rng = np.random.default_rng(ctx.seed)
    stepper = Stepper(sysm, params)
    fields = []
    for _ in range(pairs):
        u = random_lipschitz_field(rng, grid, m)
        bump = np.abs(random_lipschitz_field(rng, grid, m, amplitude=0.5))
        shift = float(rng.uniform(-5, 5))
        fields.append((u, bump, shift))
    out = []

    t0 = time.perf_counter()
    worst = 0.0
    for u, bump, _ in fields:
        v = u + bump
        worst = max(worst, float(np.max(stepper.step(u) - stepper.step(v))))
    out.append(_entry("S1.monotonicity", "semigroup: monotonicity", max(worst, 0.0), tol, t0))

    t0 = time.perf_counter()
    worst = 0.0
    for (u, _, _), (v, _, _) in zip(fields, fields[1:] + fields[:1]):
        lhs = float(np.abs(stepper.step(u) - stepper.step(v)).max())
        worst = max(worst, lhs - float(np.abs(u - v).max()))
    out.append(_entry("S1.nonexpansiveness", "semigroup: sup-norm nonexpansiveness", max(worst, 0.0), tol, t0))

    t0 = time.perf_counter()
    worst = 0.0
    for u, _, a in fields:
        worst = max(worst, float(np.abs(stepper.step(u + a) - stepper.step(u) - a).max()))
    out.append(_entry("S1.shift_equivariance", "semigroup: commutes with adding constants", worst, tol, t0))

    t0 = time.perf_counter()
    worst = 0.0
    for k, (u, _, _) in enumerate(fields):
        k1, k2 = 1 + k % 4, 1 + (k // 4) % 5
        split = stepper.evolve_steps(stepper.evolve_steps(u, k1), k2)
        whole = stepper.evolve_steps(u, k1 + k2)
        worst = max(worst, float(np.abs(split - whole).max()))
    out.append(_entry("S1.semigroup_property", "semigroup: S(t+s) = S(t)S(s)", worst, tol, t0))

    # a coupling with positive row sums cannot commute with constants
    t0 = time.perf_counter()
    broken = sysm.with_coupling(sysm.coupling.with_discount(0.5 / max(sysm.coupling.max_diagonal, 1.0)))
    bstep = Stepper(broken, params.with_(check_stability=False))
    worst = 0.0
    for u, _, a in fields[:10]:
        worst = max(worst, float(np.abs(bstep.step(u + a) - bstep.step(u) - a).max()))
    out.append(_entry("S1.shift_equivariance.negative_control", "semigroup: commutes with adding constants", worst, tol, t0, negative=True))
    return out


# -- S2: closure of subsolutions under max -------------------------------------


def suite_s2(ctx: VerificationContext) -> list[SuiteEntry]:
    sysm, params = ctx.renormalized, ctx.params
    tol = 10 * params.tol_fixed
    grid = sysm.grid
    rng = np.random.default_rng(ctx.seed + 2)
    a, b = ctx.default_seeds()
    c = ctx.cache.get(sysm.m - 1, int(rng.integers(grid.size))).values
    out = []
    t0 = time.perf_counter()
    worst = 0.0
    for v, w in ((a, b), (b, c + 0.1), (a, c - 0.05)):
        worst = max(worst, -subsolution_test(np.maximum(v, w), sysm, 0.0, params))
    out.append(_entry("S2.max_closure", "subsolutions: closed under pointwise max", max(worst, 0.0), tol, t0))
    t0 = time.perf_counter()
    spike = np.maximum(a, b).copy().reshape(sysm.m, -1)
    spike[0, grid.size // 3] += 1.0
    worst = -subsolution_test(spike, sysm, 0.0, params)
    out.append(_entry("S2.max_closure.negative_control", "subsolutions: closed under pointwise max", worst, tol, t0, negative=True))
    return out


# -- S3: subsolution test vs monotone evolution --------------------------------


def _monotone_evolution_gap(stepper, u, level, dt, steps) -> float:
    worst = 0.0
    cur = np.asarray(u, dtype=float)
    for _ in range(steps):
        nxt = stepper.step(cur) + level * dt
        worst = max(worst, float(np.max(cur - nxt)))
        cur = nxt
    return worst


def suite_s3(ctx: VerificationContext, horizon: float = 1.0) -> list[SuiteEntry]:
    sysm, params = ctx.renormalized, ctx.params
    tol = 10 * params.tol_fixed
    stepper = Stepper(sysm, params)
    steps = params.steps_for(horizon)
    zero = np.zeros((sysm.m,) + sysm.grid.shape)
    cases = [("solution", ctx.solution, 0.0), ("column", ctx.default_seeds()[-1], 0.0), ("null_below_critical", zero, -0.1)]
    out = []
    for name, u, level in cases:
        t0 = time.perf_counter()
        margin = subsolution_test(u, sysm, level, params)
        gap = _monotone_evolution_gap(stepper, u, level, params.dt, steps)
        accepted = margin >= -tol
        monotone = gap <= tol
        detail = {"margin": margin, "evolution_gap": gap, "level": level}
        if name == "null_below_critical":
            # below the critical level nothing is a subsolution
            status = "pass" if (not accepted and not monotone) else "fail"
            out.append(_entry("S3.characterization.negative_control", "subsolutions: monotone evolution", -margin, tol, t0, detail=detail, status=status))
        else:
            status = "pass" if accepted == monotone else "fail"
            out.append(_entry(f"S3.characterization.{name}", "subsolutions: monotone evolution", max(gap, -margin, 0.0) if accepted else 0.0, tol, t0, detail=detail, status=status))
    return out


# -- S4: a priori bounds -------------------------------------------------------


def _oscillation(u) -> float:
    u = np.asarray(u)
    m = u.shape[0]
    flat = u.reshape(m, -1)
    return max((float(np.abs(flat[i] - flat[j]).max()) for i in range(m) for j in range(m)), default=0.0)


def suite_s4(ctx: VerificationContext) -> list[SuiteEntry]:
    sysm, params = ctx.renormalized, ctx.params
    out = []
    t0 = time.perf_counter()
    osc = _oscillation(ctx.solution)
    bound = oscillation_bound(sysm, 0.0)
    if bound is None:
        out.append(_entry("S4.oscillation_bound", "a priori: component oscillation", osc, float("nan"), t0, status="inconclusive", detail={"reason": "bound available for m = 2 only"}))
    else:
        out.append(_entry("S4.oscillation_bound", "a priori: component oscillation", max(osc - bound, 0.0), ctx.scale, t0, detail={"oscillation": osc, "bound": bound}))

    t0 = time.perf_counter()
    grid = sysm.grid
    if grid.n % 2 == 0 and grid.n >= 8:
        coarse_grid = TorusGrid(grid.dim, grid.n // 2)
        coarse_sys = WeaklyCoupledSystem(
            coarse_grid,
            ctx.system.hamiltonians,
            type(ctx.system.coupling)(coarse_grid, ctx.system.coupling.entries),
            scalar=ctx.system.scalar,
        )
        cparams = SolverParams.for_system(coarse_sys, kernel=params.kernel)
        cctx = VerificationContext(coarse_sys, cparams, seed=ctx.seed)
        osc_c = _oscillation(cctx.solution)
        tol = 5 * (ctx.scale + cparams.first_order_scale(coarse_grid))
        out.append(_entry("S4.oscillation_refinement", "a priori: component oscillation", abs(osc - osc_c), tol, t0, detail={"fine": osc, "coarse": osc_c}))
    else:
        out.append(_entry("S4.oscillation_refinement", "a priori: component oscillation", float("nan"), float("nan"), t0, status="inconclusive", detail={"reason": "grid too small to coarsen"}))

    t0 = time.perf_counter()
    rng = np.random.default_rng(ctx.seed + 4)
    stepper = Stepper(sysm, params)
    u = random_lipschitz_field(rng, grid, sysm.m)
    lip0 = lipschitz_estimate(u, grid)
    bound = 2.0 * max(lip0, default_p_max(sysm))
    worst = lip0
    for _ in range(params.steps_for(1.0) // 8 or 1):
        u = stepper.evolve_steps(u, 8)
        worst = max(worst, lipschitz_estimate(u, grid))
    out.append(_entry("S4.lipschitz_bounded", "a priori: uniform Lipschitz bound", max(worst - bound, 0.0), 0.0, t0, detail={"max_lipschitz": worst, "bound": bound}))

    t0 = time.perf_counter()
    osc_bound = oscillation_bound(sysm, 0.0)
    if osc_bound is None:
        out.append(_entry("S4.oscillation_bound.negative_control", "a priori: component oscillation", float("nan"), float("nan"), t0, status="inconclusive", detail={"reason": "bound available for m = 2 only"}))
    else:
        lifted = np.array(ctx.solution, dtype=float)
        lifted[0] += osc_bound + 2.0 * ctx.scale + 1.0
        viol = max(_oscillation(lifted) - osc_bound, 0.0)
        out.append(_entry("S4.oscillation_bound.negative_control", "a priori: component oscillation", viol, ctx.scale, t0, negative=True))
    return out


# -- S5: Mañé matrix structure -------------------------------------------------


def _pool(ctx, rng, k):
    size = ctx.system.grid.size
    return sorted(set(int(v) for v in rng.choice(size, size=min(k, size), replace=False)))


def suite_s5(ctx: VerificationContext, samples: int = 20, pool: int = 5) -> list[SuiteEntry]:
    sysm, params = ctx.renormalized, ctx.params
    m = sysm.m
    tol = default_tol_tri(sysm, params)
    rng = np.random.default_rng(ctx.seed + 5)
    nodes = _pool(ctx, rng, pool)
    cache = ctx.cache
    phi = lambda i, j, y, z: cache.get(j, y).at(i, z)  # noqa: E731  Phi_{i,j}(y, z)
    out = []

    t0 = time.perf_counter()
    worst = -np.inf
    triples = []
    for _ in range(samples):
        x, y, z = (int(v) for v in rng.choice(nodes, size=3))
        i, j, k = (int(v) for v in rng.integers(0, m, size=3))
        triples.append((x, y, z, i, j, k))
        worst = max(worst, phi(i, k, x, z) - phi(j, k, x, y) - phi(i, j, y, z))
    out.append(_entry("S5.triangle_inequality", "Mañé matrix: triangle inequality", max(worst, 0.0), tol, t0, detail={"samples": len(triples)}))

    t0 = time.perf_counter()
    worst = -np.inf
    cols = [(j, y) for y in nodes for j in range(m)]
    for (k, x) in cols:
        w = cache.get(k, x).values.reshape(m, -1)
        for (j, y) in cols:
            target = cache.get(j, y).values.reshape(m, -1)
            worst = max(worst, float(np.max(w - w[j, y] - target)))
    out.append(_entry("S5.maximality", "Mañé matrix: maximal pinned subsolution", max(worst, 0.0), tol, t0))

    t0 = time.perf_counter()
    grid = sysm.grid
    stepper = Stepper(sysm, params)
    reach = int(np.ceil(max(params.Q) * params.dt / grid.h)) + 1
    worst = 0.0
    for (j, y) in cols:
        col = cache.get(j, y).values
        resid = np.abs(stepper.step(col) - col).reshape(m, -1)
        mask = np.ones(grid.size, dtype=bool)
        idx = np.array(np.unravel_index(y, grid.shape))
        for z in range(grid.size):
            dz = np.abs(np.array(np.unravel_index(z, grid.shape)) - idx)
            dz = np.minimum(dz, grid.n - dz)
            if dz.max() <= reach:
                mask[z] = False
        worst = max(worst, float(resid[:, mask].max()))
    out.append(_entry("S5.near_solution", "Mañé matrix: solution away from the base point", worst, tol, t0, detail={"excluded_radius_nodes": reach}))

    # lowering a column away from its pin must break maximality
    t0 = time.perf_counter()
    j, y = cols[0]
    lowered = cache.get(j, y).values.reshape(m, -1).copy()
    far = (y + grid.size // 2) % grid.size
    lowered[:, far] -= 1.0
    worst = -np.inf
    for (k, x) in cols:
        w = cache.get(k, x).values.reshape(m, -1)
        worst = max(worst, float(np.max(w - w[j, y] - lowered)))
    out.append(_entry("S5.maximality.negative_control", "Mañé matrix: maximal pinned subsolution", worst, tol, t0, negative=True))
    return out


# -- S6: rigidity on the Aubry set ---------------------------------------------


def suite_s6(ctx: VerificationContext) -> list[SuiteEntry]:
    sysm, params = ctx.renormalized, ctx.params
    m = sysm.m
    rep = ctx.aubry
    flagged = rep.flagged
    tol_rig = default_tol_rig(sysm, params)
    rig_tol = 2 * tol_rig
    out = []

    t0 = time.perf_counter()
    worst = 0.0
    zero = np.zeros((m,) + sysm.grid.shape)
    use_null = ctx.null_is_subsolution()
    for y in flagged:
        subs = [ctx.cache.get(j, y).values for j in range(m)]
        if use_null:
            subs.append(zero)
        worst = max(worst, rigidity_check([y], subs))
    out.append(_entry("S6.rigidity", "Aubry set: subsolutions differ by constants", worst, rig_tol, t0, detail={"flagged": flagged, "null_function": use_null}))

    t0 = time.perf_counter()
    rows = antisymmetry_report(sysm, flagged, ctx.cache)
    worst = max((r["defect"] for r in rows), default=0.0)
    out.append(_entry("S6.antisymmetry", "Aubry set: antisymmetric Mañé matrix", worst, rig_tol, t0))

    t0 = time.perf_counter()
    sums = [r["min_sum"] for r in rep.off_set_sums] + [r["min_sum"] for r in rows]
    worst = max((-s for s in sums), default=0.0)
    out.append(_entry("S6.diagonal_sum_lower_bound", "Mañé matrix: triangle inequality", max(worst, 0.0), default_tol_tri(sysm, params), t0))

    t0 = time.perf_counter()
    seeds = ctx.default_seeds()
    ua = ctx.solve_from(seeds[0])
    ub = ctx.solve_from(seeds[1])
    flat_a, flat_b = ua.reshape(m, -1), ub.reshape(m, -1)
    shift = float(np.mean([np.mean(flat_a[:, y] - flat_b[:, y]) for y in flagged]))
    ub_shift = ub + shift
    diff = float(np.abs(ua - ub_shift).max())
    uniq_tol = 25 * ctx.scale
    out.append(_entry("S6.uniqueness_from_trace", "Aubry set: uniqueness set", diff, uniq_tol, t0, detail={"shift": shift}))

    t0 = time.perf_counter()
    verdict = comparison_check(sysm, ub_shift, ua, flagged, params, tol=tol_rig, residual_tol=max(10 * params.tol_fixed, 1e-8))
    status = {"pass": "pass", "fail": "fail"}.get(verdict.verdict, "inconclusive")
    out.append(_entry("S6.comparison", "Aubry set: comparison principle", verdict.violation, 5 * tol_rig, t0, status=status, detail=verdict.to_dict()))

    t0 = time.perf_counter()
    if m > 1:
        y = flagged[0]
        base = ctx.cache.get(0, y).values
        tilted = base.copy()
        # deviation of a tilt t is t/2, kept well clear of the tolerance at any n
        tilted[0] += max(1.0, 4.0 * rig_tol)
        worst = rigidity_check([y], [base, tilted])
        out.append(_entry("S6.rigidity.negative_control", "Aubry set: subsolutions differ by constants", worst, rig_tol, t0, negative=True))
    return out


# -- S7: propagation of maximum points -----------------------------------------


def _max_point_defect(v, u) -> tuple[float, float]:
    m = v.shape[0]
    d = (np.asarray(v) - np.asarray(u)).reshape(m, -1)
    M = float(d.max())
    x0 = int(np.unravel_index(np.argmax(d), d.shape)[1])
    return float(np.abs(d[:, x0] - M).max()), M


def suite_s7(ctx: VerificationContext) -> list[SuiteEntry]:
    sysm, params = ctx.renormalized, ctx.params
    m = sysm.m
    tol = default_tol_rig(sysm, params)
    u = ctx.solution
    rng = np.random.default_rng(ctx.seed + 7)
    out = []
    t0 = time.perf_counter()
    worst = 0.0
    for y in _pool(ctx, rng, 3):
        for j in range(m):
            v = ctx.cache.get(j, y).values
            worst = max(worst, _max_point_defect(v, u)[0])
    out.append(_entry("S7.max_point_propagation", "maximum points propagate across components", worst, tol, t0))

    t0 = time.perf_counter()
    if m > 1:
        v = u.copy().reshape(m, -1)
        v[0, sysm.grid.size // 2] += 1.0
        worst = _max_point_defect(v, u.reshape(m, -1))[0]
        out.append(_entry("S7.max_point_propagation.negative_control", "maximum points propagate across components", worst, tol, t0, negative=True))
    return out


SUITES = {"S1": suite_s1, "S2": suite_s2, "S3": suite_s3, "S4": suite_s4, "S5": suite_s5, "S6": suite_s6, "S7": suite_s7}


def run_suite(system: WeaklyCoupledSystem, suite: str, params: SolverParams, seed: int = 0, context: VerificationContext | None = None) -> SuiteReport:
    """Run one suite (``"S1".."S7"``) or ``"all"``; reports are ordered by suite definition."""
    ctx = context or VerificationContext(system, params, seed=seed)
    names = list(SUITES) if suite == "all" else [suite]
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)} or 'all'")
    report = SuiteReport(suite, ctx.seed)
    for name in names:
        report.entries.extend(SUITES[name](ctx))
    return report
