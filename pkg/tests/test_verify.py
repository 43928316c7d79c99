import numpy as np
import pytest

from conftest import make_system, params_for
from wkam.verify import SUITES, VerificationContext, random_lipschitz_field, run_suite
from wkam.torus import TorusGrid, lipschitz_estimate

SYSTEMS = {
    "eikonal": dict(kind="eikonal_pair"),
    "shifted": dict(kind="eikonal_pair", shifts=(-0.3, -0.7)),
    "quadratic": dict(kind="quadratic_pair"),
}


@pytest.fixture(scope="module", params=sorted(SYSTEMS))
def report(request):
    s = make_system(n=64, **SYSTEMS[request.param])
    return run_suite(s, "all", params_for(s), seed=3)


def test_all_entries_pass(report):
    failed = [(e.property, e.violation, e.tolerance) for e in report.entries if e.status == "fail"]
    assert not failed
    assert report.passed


def test_every_suite_has_a_negative_control(report):
    props = [e.property for e in report.entries]
    for name in SUITES:
        mine = [p for p in props if p.startswith(name + ".")]
        assert mine, name
        assert any(p.endswith("negative_control") for p in mine), name


def test_report_serialization(report):
    d = report.to_dict()
    assert d["seed"] == 3
    for e in d["entries"]:
        assert set(e) >= {"property", "anchor", "status", "max_violation", "tolerance"}
        assert e["anchor"] and "§" not in e["anchor"]


def test_suites_are_reproducible():
    s = make_system(n=32)
    p = params_for(s)
    a = run_suite(s, "S1", p, seed=11).to_dict()
    b = run_suite(s, "S1", p, seed=11).to_dict()
    strip = lambda d: [{k: v for k, v in e.items() if k != "runtime"} for e in d["entries"]]
    assert strip(a) == strip(b)


def test_unknown_suite():
    s = make_system(n=16)
    with pytest.raises(ValueError):
        run_suite(s, "S9", params_for(s))


def test_random_fields_are_lipschitz():
    g = TorusGrid(1, 64)
    rng = np.random.default_rng(0)
    for _ in range(10):
        f = random_lipschitz_field(rng, g, 2)
        assert f.shape == (2, 64) and lipschitz_estimate(f, g) <= 60


def test_shared_context_reuses_aubry():
    s = make_system(n=32)
    ctx = VerificationContext(s, params_for(s), seed=0)
    run_suite(s, "S6", ctx.params, context=ctx)
    first = ctx.aubry
    run_suite(s, "S5", ctx.params, context=ctx)
    assert ctx.aubry is first
