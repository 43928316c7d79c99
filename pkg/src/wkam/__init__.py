"""Numerical weak KAM toolkit for weakly coupled Hamilton-Jacobi systems on the flat torus."""

from .aubry import AubryReport, detect_aubry, rigidity_check
from .config import ConfigError, ProblemConfig, example_config, load_config
from .coupling import CouplingField, is_irreducible, left_null_vector, pi_lambda
from .critical import estimate_critical_value, solve_critical
from .hamiltonian import HamiltonianSpec
from .mane import ManeColumn, mane_column
from .semigroup import NumericalError, Stepper, evolve, step, subsolution_test
from .system import SolverParams, WeaklyCoupledSystem
from .torus import TorusGrid

__version__ = "0.1.0"

__all__ = [
    "AubryReport",
    "ConfigError",
    "CouplingField",
    "HamiltonianSpec",
    "ManeColumn",
    "NumericalError",
    "ProblemConfig",
    "SolverParams",
    "Stepper",
    "TorusGrid",
    "WeakKAMSolver",
    "WeaklyCoupledSystem",
    "detect_aubry",
    "estimate_critical_value",
    "evolve",
    "example_config",
    "is_irreducible",
    "left_null_vector",
    "load_config",
    "mane_column",
    "pi_lambda",
    "rigidity_check",
    "solve_critical",
    "step",
    "subsolution_test",
]


def __getattr__(name):
    # the estimator pulls in scikit-learn; import it on first use
    if name == "WeakKAMSolver":
        from .estimator import WeakKAMSolver

        return WeakKAMSolver
    raise AttributeError(name)
