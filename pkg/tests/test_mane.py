import numpy as np
import pytest

from conftest import make_scalar, make_system, params_for
from wkam.critical import estimate_critical_value
from wkam.mane import ColumnCache, column_subsolution_margin, default_tol_tri, mane_column, mane_pair
from wkam.semigroup import Stepper


@pytest.fixture(scope="module")
def pair():
    s = make_system(n=64)
    p = params_for(s)
    ren = s.renormalized(estimate_critical_value(s, p, refine_tol=1e-12).c_hat)
    return ren, p, ColumnCache(ren, p)


def test_scalar_column_matches_arc_integral(frozen):
    s = make_scalar(n=128)
    p = params_for(s)
    col = mane_column(s, 0, 0, p)
    half = s.grid.nearest_node(0.5)
    assert col.at(0, 0) == 0.0
    assert col.at(0, half) == pytest.approx(frozen["arc_integral_half"], abs=0.02)


def test_pin_and_subsolution(pair):
    ren, p, cache = pair
    col = cache.get(1, 10)
    assert col.at(1, 10) == 0.0
    assert col.pin_violation <= 10 * col.tolerance
    assert column_subsolution_margin(col, ren, p) >= -10 * col.tolerance
    assert col.to_dict()["base_component"] == 2


def test_iterates_decrease_monotonically(pair):
    ren, p, _ = pair
    st = Stepper(ren, p)
    u = np.full((2, 64), p.cap)
    u[0, 0] = 0.0
    for _ in range(30):
        nxt = np.minimum(u, st.step(u))
        nxt[0, 0] = 0.0
        assert np.all(nxt <= u)
        u = nxt


def test_triangle_inequality(pair):
    ren, p, cache = pair
    tol = default_tol_tri(ren, p)
    nodes = [0, 9, 23, 40]
    worst = 0.0
    for x in nodes:
        for y in nodes:
            for z in nodes:
                A, B, C = mane_pair(ren, x, z, p, cache), mane_pair(ren, x, y, p, cache), mane_pair(ren, y, z, p, cache)
                for i in range(2):
                    for j in range(2):
                        for k in range(2):
                            worst = max(worst, A[i, j] - B[k, j] - C[i, k])
    assert worst <= tol


def test_cache_reuses_columns(pair):
    ren, p, cache = pair
    a = cache.get(0, 5)
    assert cache.get(0, 5) is a and (0, 5) in cache


def test_bad_indices(pair):
    ren, p, _ = pair
    with pytest.raises(ValueError):
        mane_column(ren, 2, 0, p)
    with pytest.raises(ValueError):
        mane_column(ren, 0, 64, p)
