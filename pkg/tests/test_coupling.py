from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from wkam.coupling import CouplingField, image_obstruction, is_irreducible, left_null_vector, pi_lambda, validate
from wkam.torus import TorusGrid

MATS = {
    "sym2": [[1, -1], [-1, 1]],
    "star3": [[2, -1, -1], [-1, 1, 0], [-1, 0, 1]],
    "cycle3": [[1, -1, 0], [0, 2, -2], [-3, 0, 3]],
}


def field(entries, n=4):
    return CouplingField(TorusGrid(1, n), entries)


def test_validate_examples():
    r = field([[1, -1], [-1, 1]]).report
    assert (r.is_coupling, r.is_degenerate, r.is_irreducible) == (True, True, True)
    r = field([[2, -1], [-1, 1]]).report
    assert r.is_coupling and not r.is_degenerate
    r = field([[1, -2], [-1, 1]]).report
    assert not r.is_coupling
    assert r.violations[0] == {"node": 0, "condition": "row sum < 0"}


def test_x_dependent_field_reports_failing_nodes():
    cf = field([["1 + sin(2*pi*x1)", "-1 - sin(2*pi*x1)"], [-1, 1]], n=8)
    assert not cf.is_constant
    assert cf.report.is_coupling and cf.report.is_degenerate
    # b_12 vanishes at x = 3/4: the support digraph loses an edge there
    assert not cf.report.is_irreducible
    assert [v["node"] for v in cf.report.violations] == [6]
    assert cf.beta_min == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        cf.constant_matrix()


def test_report_serializes():
    d = field([[1, -1], [-1, 1]]).report.to_dict()
    assert set(d) == {"is_coupling", "is_degenerate", "is_irreducible", "beta_min", "beta_max", "violations"}


def test_irreducible_examples():
    assert is_irreducible([[1, -1, 0], [0, 1, -1], [-1, 0, 1]])
    assert not is_irreducible([[1, -1, 0], [-1, 1, 0], [0, 0, 0]])
    assert not is_irreducible([[1, -1], [0, 0]])


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 5).flatmap(lambda m: st.lists(st.lists(st.sampled_from([0, 0, -1, -2]), min_size=m, max_size=m), min_size=m, max_size=m)))
def test_irreducible_matches_subset_definition(M):
    assert is_irreducible(M) == oracles.irreducible_by_subsets(M)


@pytest.mark.parametrize("name", sorted(MATS))
def test_left_null_vector_against_exact_oracle(name, frozen):
    M = MATS[name]
    ell = left_null_vector(M)
    expect = [float(Fraction(v)) for v in frozen["left_null"][name]]
    assert np.allclose(ell, expect, atol=1e-12, rtol=0)
    assert np.abs(ell @ np.array(M, float)).max() <= 1e-10 * np.abs(M).max()
    assert ell.sum() == pytest.approx(1.0, abs=1e-15)


def test_left_null_vector_preconditions():
    with pytest.raises(ValueError):
        left_null_vector([[2, -1], [-1, 1]])
    with pytest.raises(ValueError):
        left_null_vector([[1, -1, 0], [-1, 1, 0], [0, 0, 0]])


def test_pi_examples(frozen):
    assert pi_lambda(MATS["sym2"], [2, 0]) == pytest.approx(float(Fraction(frozen["pi"]["sym2_lam20"])), abs=1e-12)
    assert pi_lambda(MATS["star3"], [0, 3, 3]) == pytest.approx(float(Fraction(frozen["pi"]["star3_lam033"])), abs=1e-12)
    assert pi_lambda(MATS["sym2"], [0.3, 0.7]) == pytest.approx(float(Fraction(frozen["pi"]["sym2_lam0307"])), abs=1e-12)
    assert pi_lambda(MATS["cycle3"], [1.7, 1.7, 1.7]) == pytest.approx(1.7, abs=1e-12)


def _random_degenerate_irreducible(rng, m):
    while True:
        off = -rng.integers(0, 4, size=(m, m)) * (rng.random((m, m)) < 0.7)
        np.fill_diagonal(off, 0)
        M = off - np.diag(off.sum(axis=1))
        if is_irreducible(M):
            return M.astype(int)


def test_pi_residual_linearity_and_kernel_rigidity(rng):
    from scipy.linalg import null_space

    for _ in range(40):
        m = int(rng.integers(2, 6))
        M = _random_degenerate_irreducible(rng, m)
        lam, mu = rng.normal(size=m), rng.normal(size=m)
        p = pi_lambda(M, lam)
        assert p == pytest.approx(float(oracles.pi_direct(M.tolist(), [Fraction(v) for v in lam])), abs=1e-10)
        res, *_ = np.linalg.lstsq(M.astype(float), lam - p, rcond=None)
        assert np.abs(M @ res - (lam - p)).max() <= 1e-10
        a, b = rng.normal(size=2)
        assert pi_lambda(M, a * lam + b * mu) == pytest.approx(a * p + b * pi_lambda(M, mu), abs=1e-12)
        assert pi_lambda(M, np.ones(m)) == pytest.approx(1.0, abs=1e-12)
        k = null_space(M.astype(float))[:, 0]
        k = k * np.sign(k.sum())
        assert np.abs(k - 1 / np.sqrt(m)).max() <= 1e-8


def test_invertible_when_a_row_sum_is_positive(rng):
    for _ in range(20):
        m = int(rng.integers(2, 5))
        M = _random_degenerate_irreducible(rng, m).astype(float)
        M[int(rng.integers(m)), int(rng.integers(m))] += 0.0
        M[0, 0] += 1.0
        x = np.linalg.solve(M, np.eye(m)[0])
        assert np.abs(M @ x - np.eye(m)[0]).max() <= 1e-12 * np.linalg.cond(M)


def test_image_obstruction_examples():
    assert image_obstruction(MATS["sym2"], [1, 1]).obstructed
    r = image_obstruction(MATS["sym2"], [1, -1])
    assert not r.obstructed and r.residual <= 1e-12
    assert np.allclose(np.array(MATS["sym2"]) @ r.mu, [1, -1])
    r = image_obstruction(MATS["sym2"], [0, 0])
    assert not r.obstructed and r.residual == 0.0


def test_discount_shifts_diagonal():
    cf = field([[1, -1], [-1, 1]]).with_discount(0.25)
    assert not cf.report.is_degenerate and cf.report.is_coupling
    assert cf.max_diagonal == 1.25
    assert validate(cf).beta_min == 1.25
