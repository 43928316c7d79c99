import math

import numpy as np
import pytest

import oracles
from conftest import make_scalar, make_system, params_for
from wkam.coupling import CouplingField
from wkam.hamiltonian import HamiltonianSpec
from wkam.semigroup import NumericalError, Stepper, control_lattice, evolve, step, subsolution_test
from wkam.system import WeaklyCoupledSystem
from wkam.torus import TorusGrid, torus_distance


def random_fields(rng, system, k=1):
    shape = (system.m,) + system.grid.shape
    return [rng.normal(size=shape) for _ in range(k)]


def test_dt_rule_and_lattice():
    s = make_system(n=256)
    p = params_for(s)
    assert p.dt == 1 / 285
    assert p.dt * s.coupling.max_diagonal <= 1
    lat = control_lattice(1.0, 3, 2)
    assert tuple(lat[0]) == (0, 0)
    assert len(lat) == 49 and {tuple(r) for r in lat} >= {(3, 3), (-3, -3)}


def test_constants_are_fixed_for_flat_potentials():
    s = make_system(n=32, kind="flat_pair")
    p = params_for(s)
    u = np.full((2, 32), 3.25)
    assert np.array_equal(step(u, s, p), u)


def test_erosion_matches_brute_force_oracle():
    s = make_scalar(n=40, V="0")
    p = params_for(s)
    g = s.grid
    u = np.array([[torus_distance(x, 0.0) for x in g.axis()]])
    out = step(u, s, p)[0]
    ref = oracles.erosion_step(list(u[0]), g.n, p.dt, p.n_q[0])
    assert np.abs(out - np.array(ref)).max() <= 1e-14
    assert np.abs(out - np.maximum(u[0] - p.dt, 0.0)).max() <= 1e-14


def test_one_step_hand_expansion():
    s = make_system(n=64)
    p = params_for(s)
    V = [list(v) for v in s.potential.reshape(2, -1)]
    ref = np.array(oracles.one_step_from_zero(V, [[1, -1], [-1, 1]], p.dt))
    assert np.abs(step(np.zeros((2, 64)), s, p) - ref).max() <= 1e-15


@pytest.mark.parametrize("kind", ["eikonal_pair", "quadratic_pair"])
def test_shift_monotone_nonexpansive(kind, rng):
    s = make_system(n=48, kind=kind)
    st = Stepper(s, params_for(s))
    for _ in range(20):
        u, w = random_fields(rng, s, 2)
        a = rng.normal()
        assert np.abs(st.step(u + a) - st.step(u) - a).max() <= 1e-12
        v = u + np.abs(w)
        assert (st.step(u) - st.step(v)).max() <= 1e-12
        assert np.abs(st.step(u) - st.step(w)).max() <= np.abs(u - w).max() + 1e-12


def test_nondegenerate_coupling_breaks_shift_equivariance(rng):
    s = make_system(n=32, B=((2, -1), (-1, 1)))
    st = Stepper(s, params_for(s))
    u = random_fields(rng, s)[0]
    assert np.abs(st.step(u + 1.0) - st.step(u) - 1.0).max() > 1e-4


def test_semigroup_property_is_bitwise():
    s = make_system(n=64, kind="quadratic_pair")
    p = params_for(s)
    u0 = np.stack([np.sin(2 * np.pi * s.grid.axis()), np.cos(2 * np.pi * s.grid.axis())])
    T1, T2 = 5 * p.dt, 7 * p.dt
    a = evolve(evolve(u0, T1, s, p).final, T2, s, p).final
    b = evolve(u0, T1 + T2, s, p).final
    assert np.array_equal(a, b)
    assert np.array_equal(evolve(u0, 0.0, s, p).final, u0)


def test_evolve_snapshots_and_lipschitz_monitor():
    s = make_system(n=32)
    p = params_for(s)
    K = p.steps_for(20 * p.dt)
    traj = evolve(np.zeros((2, 32)), K * p.dt, s, p, snapshot_times=[5 * p.dt])
    assert traj.times == [0.0, 5 * p.dt, K * p.dt]
    assert len(traj.lipschitz) == 3 and all(math.isfinite(v) for v in traj.lipschitz)
    with pytest.raises(ValueError):
        p.steps_for(0.5 * p.dt)


def test_nan_detection_reports_step():
    s = make_system(n=16)
    p = params_for(s)
    u = np.zeros((2, 16))
    u[0, 3] = np.nan
    with pytest.raises(NumericalError) as info:
        evolve(u, 3 * p.dt, s, p)
    assert info.value.payload["step_index"] == 1


def test_unstable_time_step_is_rejected():
    s = make_system(n=16, B=((5, -5), (-5, 5)))
    p = params_for(s).with_(dt=0.5)
    with pytest.raises(ValueError, match="unstable"):
        Stepper(s, p)


def test_subsolution_test_examples():
    s = make_system(n=64)
    p = params_for(s)
    zero = np.zeros((2, 64))
    assert subsolution_test(zero, s, 0.0, p) >= -1e-9
    assert subsolution_test(zero, s, -0.1, p) < 0
    u = np.random.default_rng(2).normal(size=(2, 64))
    osc = u.max() - u.min()
    big = max(0.0, -float(s.potential.min())) + s.coupling.beta_max * osc + 1.0
    assert subsolution_test(u * 0.0 + 0.25, s, big, p) >= 0
    smooth = 0.02 * np.stack([np.sin(2 * np.pi * s.grid.axis())] * 2)
    assert subsolution_test(smooth, s, big, p) >= 0


@pytest.mark.parametrize("kind", ["eikonal_pair", "quadratic_pair"])
def test_exact1d_kernel_matches_lattice_scan(kind, rng):
    s = make_system(n=48, kind=kind)
    p = params_for(s)
    fast = Stepper(s, p.with_(kernel="exact1d"))
    slow = Stepper(s, p.with_(kernel="lattice"))
    for _ in range(10):
        u = random_fields(rng, s)[0]
        assert np.abs(fast.step(u) - slow.step(u)).max() <= 1e-12
    u = random_fields(rng, s)[0]
    assert np.abs(fast.evolve_steps(u, 10) - slow.evolve_steps(u, 10)).max() <= 1e-11


def test_cap_sentinel_acts_as_infinity():
    s = make_system(n=32)
    p = params_for(s)
    u = np.full((2, 32), p.cap)
    u[0, 0] = 0.0
    out = Stepper(s, p).transport(u)
    assert out[0, 0] == 0.0
    assert out[0, 16] >= 0.5 * p.cap and np.all(out[1] >= 0.5 * p.cap)


def test_two_dimensional_lattice_kernel(rng):
    g = TorusGrid(2, 12)
    V = "2 - cos(2*pi*x1) - cos(2*pi*x2)"
    hs = [HamiltonianSpec("eikonal", "1", V), HamiltonianSpec("power", "1", V, 2.0)]
    s = WeaklyCoupledSystem(g, hs, CouplingField(g, [[1, -1], [-1, 1]]))
    p = params_for(s)
    st = Stepper(s, p)
    assert st.kernel == "lattice"
    zero = np.zeros((2, 12, 12))
    one = st.step(zero)
    Vs = s.potential
    P = np.array([[1, -1], [-1, 1]])
    ref = p.dt * Vs - p.dt**2 * np.einsum("ij,jxy->ixy", P, Vs)
    assert np.abs(one - ref).max() <= 1e-15
    u, w = rng.normal(size=(2, 2, 12, 12))
    assert np.abs(st.step(u + 0.7) - st.step(u) - 0.7).max() <= 1e-12
    assert np.abs(st.step(u) - st.step(w)).max() <= np.abs(u - w).max() + 1e-12
    # symmetry under swapping axes
    sw = u.transpose(0, 2, 1)
    assert np.abs(st.step(sw) - st.step(u).transpose(0, 2, 1)).max() <= 1e-12
    with pytest.raises(ValueError):
        Stepper(s, p.with_(kernel="exact1d"))


