import json
from pathlib import Path

import numpy as np
import pytest

from wkam.coupling import CouplingField
from wkam.hamiltonian import HamiltonianSpec
from wkam.system import SolverParams, WeaklyCoupledSystem
from wkam.torus import TorusGrid

FROZEN = json.loads((Path(__file__).parent / "frozen" / "oracle_values.json").read_text())

V1 = "1 - cos(2*pi*x1)"
V2 = "2*(1 - cos(2*pi*x1))"


def make_system(n=64, kind="eikonal_pair", B=((1, -1), (-1, 1)), shifts=(0.0, 0.0), dim=1):
    grid = TorusGrid(dim, n)
    if kind == "eikonal_pair":
        hs = [HamiltonianSpec("eikonal", "1", V1, shift=shifts[0]), HamiltonianSpec("eikonal", "1", V2, shift=shifts[1])]
    elif kind == "quadratic_pair":
        hs = [HamiltonianSpec("power", "1", V1, 2.0, shift=shifts[0]), HamiltonianSpec("power", "1", V1, 2.0, shift=shifts[1])]
    elif kind == "flat_pair":
        hs = [HamiltonianSpec("eikonal", "1", "0"), HamiltonianSpec("eikonal", "1", "0")]
    else:
        raise ValueError(kind)
    return WeaklyCoupledSystem(grid, hs, CouplingField(grid, [list(r) for r in B]))


def make_scalar(n=64, V=V1, family="eikonal"):
    grid = TorusGrid(1, n)
    return WeaklyCoupledSystem(grid, [HamiltonianSpec(family, "1", V)], CouplingField(grid, [[0.0]]), scalar=True)


@pytest.fixture
def frozen():
    return FROZEN


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def params_for(system, **kw):
    return SolverParams.for_system(system, **kw)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
