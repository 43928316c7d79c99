import numpy as np
import pytest

from conftest import make_scalar, make_system, params_for
from wkam.aubry import aubry_indicator, comparison_check, detect_aubry, gradient_agreement, rigidity_check
from wkam.critical import estimate_critical_value, solve_critical


@pytest.fixture(scope="module")
def eikonal():
    s = make_system(n=64)
    p = params_for(s)
    est = estimate_critical_value(s, p, refine_tol=1e-12)
    ren = s.renormalized(est.c_hat)
    return ren, p, est


def test_flat_scalar_indicator_vanishes():
    s = make_scalar(n=32, V="0")
    p = params_for(s)
    for y in (0, 7, 20):
        assert aubry_indicator(s, y, p, T_test=0.5) <= 1e-12


def test_indicator_separates_aubry_point(eikonal):
    ren, p, _ = eikonal
    on = aubry_indicator(ren, 0, p)
    off = aubry_indicator(ren, 16, p)
    assert on < 1e-8 < off


def test_detection_on_eikonal_pair(eikonal):
    ren, p, est = eikonal
    rep = detect_aubry(ren, p, stride=4, c_uncertainty=est.uncertainty, consistency=True)
    assert rep.flagged
    assert all(ren.grid.node_distance(y, 0) <= 2 * ren.grid.h for y in rep.flagged)
    for nd in rep.nodes:
        assert nd.rigidity_dev <= 10 * p.first_order_scale(ren.grid)
        assert nd.antisym_defect <= 10 * p.first_order_scale(ren.grid)
    assert rep.consistency["symmetric_difference"] == []
    d = rep.to_dict()
    assert d["base_component"] == 1 and d["evaluated"] >= 64 // 4
    assert np.isnan(rep.sigma_grid(ren.grid)).sum() == 64 - len(rep.sigma)


def test_rigidity_trivial_cases():
    v = np.random.default_rng(0).normal(size=(2, 10))
    assert rigidity_check(range(10), [v, v + 3.0]) == pytest.approx(0.0, abs=1e-14)
    w = v.copy()
    w[1, 4] += 0.5
    assert rigidity_check([4], [v, w]) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        rigidity_check([0], [v])


def test_comparison_verdicts(eikonal):
    ren, p, _ = eikonal
    u = solve_critical(ren, np.zeros((2, 64)), p).u
    tol = 1e-6
    assert comparison_check(ren, np.zeros((2, 64)), u, [0], p, tol).verdict == "pass"
    assert comparison_check(ren, u, u, [0], p, tol).verdict == "pass"
    lifted = comparison_check(ren, np.zeros((2, 64)), u - 1.0, [0], p, tol)
    assert lifted.verdict == "inconclusive" and "hypothesis" in lifted.reason
    bumpy = np.zeros((2, 64))
    bumpy[0, 10] = 1.0
    assert comparison_check(ren, bumpy, u, [0], p, tol).verdict == "inconclusive"
    assert comparison_check(ren, np.zeros((2, 64)), u, [], p, tol).reason == "empty Aubry set"


def test_gradient_agreement_requires_strict_convexity(eikonal):
    ren, _, _ = eikonal
    with pytest.raises(ValueError):
        gradient_agreement(ren, 0, [np.zeros((2, 64))])
    quad = make_system(n=64, kind="quadratic_pair")
    x = quad.grid.axis()
    v = np.stack([np.sin(2 * np.pi * x)] * 2)
    assert gradient_agreement(quad, 5, [v, v]) == 0.0
    assert gradient_agreement(quad, 5, [v, v + np.stack([x * 0 + 0.1 * (np.arange(64) >= 5)] * 2)]) >= 0.0
