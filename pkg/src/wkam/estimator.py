"""scikit-learn style front end: ``fit`` a system, ``predict`` the critical solution."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .aubry import detect_aubry
from .config import ConfigError, ProblemConfig, load_config
from .critical import estimate_critical_value, solve_critical
from .system import WeaklyCoupledSystem
from .torus import interpolate
from .verify import REFINE_TOL, VerificationContext

__all__ = ["WeakKAMSolver", "check_system", "check_points"]


def check_system(X, n=None, scalar=False) -> tuple[ProblemConfig, WeaklyCoupledSystem]:
    """Accept a ProblemConfig, a config dict or a path to a JSON config."""
    if isinstance(X, ProblemConfig):
        cfg = X
    elif isinstance(X, dict):
        cfg = ProblemConfig.from_dict(X, scalar=scalar)
    elif isinstance(X, (str, bytes)) or hasattr(X, "__fspath__"):
        cfg = load_config(X, scalar=scalar)
    else:
        raise ConfigError(f"expected a problem configuration, got {type(X).__name__}")
    if n is not None and n != cfg.grid.n:
        cfg = cfg.with_grid(n)
    system = cfg.build_system()
    system.check()
    return cfg, system


def check_points(X, dim: int) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.shape[1] != dim:
        raise ValueError(f"points have {X.shape[1]} coordinates, the torus has {dim}")
    return X


class WeakKAMSolver(BaseEstimator):
    """Critical value, critical solution and Aubry set of a weakly coupled system.

    ``fit`` takes a problem configuration (object, dict or JSON path).  After
    fitting, ``predict`` interpolates the critical solution at points of the torus
    and returns an array of shape ``(n_points, m)``.
    """

    def __init__(self, n=None, stride=4, T_test=1.0, C_A=10.0, refine_tol=REFINE_TOL, detect=True, workers=1, scalar=False):
        self.n = n
        self.stride = stride
        self.T_test = T_test
        self.C_A = C_A
        self.refine_tol = refine_tol
        self.detect = detect
        self.workers = workers
        self.scalar = scalar

    def fit(self, X, y=None):
        cfg, system = check_system(X, n=self.n, scalar=self.scalar)
        params = cfg.solver_params(system)
        est = estimate_critical_value(system, params, refine_tol=self.refine_tol)
        ren = system.renormalized(est.c_hat)
        aubry = None
        if self.detect:
            aubry = detect_aubry(
                ren, params, stride=self.stride, T_test=self.T_test, C_A=self.C_A,
                c_uncertainty=est.uncertainty, workers=self.workers,
            )
        ctx = VerificationContext(system, params, seed=cfg.seed, critical=est, aubry=aubry)
        sol = solve_critical(ren, ctx.default_seeds()[0], params)
        self.config_ = cfg
        self.system_ = system
        self.params_ = params
        self.critical_ = est
        self.critical_value_ = est.c_hat
        self.solution_ = sol.u
        self.residual_ = sol.residual
        self.aubry_report_ = aubry
        self.aubry_nodes_ = None if aubry is None else [tuple(system.grid.node_coords(y)) for y in aubry.flagged]
        self.n_components_ = system.m
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        pts = check_points(X, self.system_.grid.dim)
        return np.stack([interpolate(comp, pts) for comp in self.solution_], axis=1)
