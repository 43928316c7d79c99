"""Critical value estimation, renormalization and critical solutions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .coupling import left_null_vector
from .semigroup import NumericalError, Stepper
from .system import SolverParams, WeaklyCoupledSystem, default_p_max, oscillation_bound

__all__ = [
    "CriticalEstimate",
    "DiscountedResult",
    "CriticalSolution",
    "estimate_critical_value",
    "discounted_solve",
    "solve_critical",
    "default_tol_c",
]

logger = logging.getLogger(__name__)


def default_tol_c(system: WeaklyCoupledSystem, params: SolverParams) -> float:
    return max(0.02, 5.0 * params.first_order_scale(system.grid))


@dataclass
class CriticalEstimate:
    c_hat: float
    method: str
    uncertainty: float
    iterations: int
    residual: float
    horizon: float = 0.0
    tolerance: float = 0.0
    c_dsc: float | None = None
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.uncertainty <= self.tolerance

    def to_dict(self) -> dict:
        out = {
            "c_hat": self.c_hat,
            "uncertainty": self.uncertainty,
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "horizon": self.horizon,
            "tolerance": self.tolerance,
        }
        if self.c_dsc is not None:
            out["c_dsc"] = self.c_dsc
        return out


def estimate_critical_value(
    system: WeaklyCoupledSystem,
    params: SolverParams,
    tol: float | None = None,
    refine_tol: float | None = None,
    T0: float = 1.0,
    max_horizon: float = 1024.0,
    stepper: Stepper | None = None,
) -> CriticalEstimate:
    """Slope method: ``S(t) 0 / t -> -c``.

    Over the window ``[T, 2T]`` each node gives the slope ``-(u(2T) - u(T)) / T``;
    ``T`` doubles until the spread of these slopes around their mean is at most
    ``tol``.  Any bounded solution ``w`` gives ``u(t) = w - c t + o(1)``, so the
    spread shrinks with the transient rather than like ``1/T``.

    With ``refine_tol`` the doubling continues past ``tol`` (up to
    ``max_horizon``) to sharpen the estimate used for renormalization; only
    missing ``tol`` is an error.
    """
    tol = default_tol_c(system, params) if tol is None else float(tol)
    target = tol if refine_tol is None else min(tol, float(refine_tol))
    stepper = stepper or Stepper(system, params)
    T = float(T0)
    steps = params.steps_for(T)
    u = stepper.evolve_steps(np.zeros((system.m,) + system.grid.shape), steps)
    total = steps
    history = []
    while True:
        u_next = stepper.evolve_steps(u, steps)
        total += steps
        slopes = -(u_next - u) / T
        c_hat = float(slopes.mean())
        spread = float(np.abs(slopes - c_hat).max())
        history.append({"T": T, "c_hat": c_hat, "spread": spread})
        logger.debug("slope window T=%g: c_hat=%.15g spread=%.3g", T, c_hat, spread)
        if spread <= target:
            break
        if 2 * T > max_horizon:
            if spread <= tol:
                break
            raise NumericalError(
                "critical value estimate did not converge", spread=spread, c_hat=c_hat, horizon=T
            )
        u = u_next
        T *= 2
        steps *= 2
    # one step of the renormalized scheme on the final state measures stationarity
    resid = float(np.abs(stepper.step(u_next) - u_next + params.dt * c_hat).max())
    return CriticalEstimate(
        c_hat=c_hat,
        method="slope",
        uncertainty=spread,
        iterations=total,
        residual=resid,
        horizon=T,
        tolerance=tol,
        history=history,
    )


@dataclass
class DiscountedResult:
    u: np.ndarray
    c_dsc: float
    delta: float
    iterations: int
    increment: float
    weights: np.ndarray
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "c_dsc": self.c_dsc,
            "delta": self.delta,
            "iterations": self.iterations,
            "increment": self.increment,
            "weights": self.weights.tolist(),
            "tolerance": self.tolerance,
        }


def discounted_solve(
    system: WeaklyCoupledSystem,
    delta: float,
    params: SolverParams,
    u0=None,
) -> DiscountedResult:
    """Fixed point of the scheme with coupling ``B + delta I`` (ergodic approximation).

    Each step contracts by ``1 - delta*dt``; iteration stops once the per-step
    increment, read as a rate ``||du|| / dt``, is below ``tol_fixed * delta``,
    which bounds the distance to the fixed point by ``tol_fixed``.
    """
    if not delta > 0:
        raise ValueError("discount must be positive")
    if delta * params.dt >= 1:
        raise ValueError("discount too large for the time step (delta*dt >= 1)")
    discounted = system.with_coupling(system.coupling.with_discount(delta))
    stepper = Stepper(discounted, params)
    u0 = np.zeros((system.m,) + system.grid.shape) if u0 is None else np.asarray(u0, dtype=float)
    tol_abs = params.tol_fixed * delta * params.dt
    u, it, inc, grew = stepper.contract(u0, tol_abs, params.max_iter)
    if grew:
        raise NumericalError("discounted iteration is not contracting", increment=inc, iterations=it)
    if inc > tol_abs:
        raise NumericalError("discounted iteration did not converge", increment=inc, iterations=it)
    if system.coupling.is_constant and system.m > 1:
        weights = left_null_vector(system.coupling.constant_matrix())
    else:
        weights = np.full(system.m, 1.0 / system.m)
    means = u.reshape(system.m, -1).mean(axis=1)
    c_dsc = float(-delta * weights @ means)
    return DiscountedResult(u, c_dsc, float(delta), it, inc, weights, params.tol_fixed)


@dataclass
class CriticalSolution:
    u: np.ndarray
    iterations: int
    increment: float
    residual: float

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "increment": self.increment, "residual": self.residual}


def growth_limit(system: WeaklyCoupledSystem) -> float:
    """Generous bound on how far a monotone ascent from a subsolution can rise."""
    p = default_p_max(system)
    osc = oscillation_bound(system, max(system.level_upper_bound(), 0.0)) or 0.0
    return 10.0 * (1.0 + p * np.sqrt(system.grid.dim) + osc)


def solve_critical(
    system: WeaklyCoupledSystem,
    seed,
    params: SolverParams,
    tol_rel: float | None = None,
    stepper: Stepper | None = None,
) -> CriticalSolution:
    """Monotone ascent ``u <- max(u, S_h(dt) u)`` from a critical subsolution.

    ``system`` must already be renormalized to critical level 0.
    """
    stepper = stepper or Stepper(system, params)
    tol_rel = params.tol_fixed if tol_rel is None else tol_rel
    seed = np.asarray(seed, dtype=float).reshape((system.m,) + system.grid.shape)
    limit = growth_limit(system)
    u, it, inc = stepper.ascend(seed, tol_rel, params.max_iter, limit)
    grown = float((u - seed).max())
    if grown > limit or not np.isfinite(inc):
        raise NumericalError(
            "ascent grows without bound: the seed is not a subsolution at the renormalized level "
            "(the critical value estimate is too high); refine the estimate",
            growth=grown,
            iterations=it,
        )
    if inc > tol_rel * (1.0 + float(np.abs(u).max())):
        raise NumericalError("ascent did not converge", increment=inc, iterations=it)
    resid = float(np.abs(stepper.step(u) - u).max())
    return CriticalSolution(u, it, inc, resid)
