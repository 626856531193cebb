import math

import numpy as np
import pytest

from conftest import all_boxes, cell_overlaps, random_gf
from lplab.dyadic import default_system, maximal_function
from lplab.gridfn import DomainSpec, GridFunction
from lplab.orlicz import (REGISTRY, Complementary, DivergentSupremum, LogBump, LogLogBump, Power, Table,
                          bp_constant, check_young, complementary, luxemburg_norm, luxemburg_values, orlicz_maximal,
                          parse_young, young_eval, young_inverse)

E = math.e


def test_power_and_logbump_values():
    for p in [1.0, 1.5, 3.0]:
        assert young_eval(Power(p), 2.0) == pytest.approx(2.0 ** p, rel=1e-14)
    for p, d in [(2.0, 1.0), (3.0, 0.5), (1.5, 1.0)]:
        assert young_eval(LogBump(p, d), E) == pytest.approx(E ** p * math.log(2 * E) ** (p - 1 + d), rel=1e-13)
    t = 5.0
    assert young_eval(LogLogBump(2.0, 1.0), t) == pytest.approx(
        t ** 2 * math.log(E + t) * math.log(math.log(E ** E + t)) ** 2, rel=1e-13)


def test_registry_parsing():
    for spec in REGISTRY:
        assert parse_young(spec).id == spec
    assert parse_young("dual:power:2").id == "dual:power:2"
    with pytest.raises(KeyError):
        parse_young("cosh:2")
    with pytest.raises(ValueError):
        LogBump(0.5, 1.0)


@pytest.mark.parametrize("spec", REGISTRY)
def test_inverse_round_trip(spec):
    phi = parse_young(spec)
    t = np.geomspace(1e-3, 1e3, 61)
    assert np.allclose(young_inverse(phi, young_eval(phi, t)), t, rtol=1e-8)
    assert young_eval(phi, 0.0) == 0.0 and young_inverse(phi, 0.0) == 0.0


@pytest.mark.parametrize("spec", REGISTRY)
def test_young_axioms(spec):
    rep = check_young(parse_young(spec))
    assert rep["limits_ok"] and rep["convex"] and rep["increasing"]


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.5])
def test_power_complementary_stationary_point(p):
    """Closed form from the stationary point s = (t/p)^{1/(p-1)} of st - s^p."""
    pp = p / (p - 1)
    ts = np.geomspace(1e-2, 1e2, 25)
    s = (ts / p) ** (1 / (p - 1))
    oracle = ts * s - s ** p
    closed = complementary(Power(p))
    assert closed.p == pytest.approx(pp)
    assert np.allclose(closed(ts), oracle, rtol=1e-12)
    # the generic numerical complement agrees with the closed form
    generic = Complementary(Power(p))
    assert np.allclose(generic(ts), oracle, rtol=1e-8)


def test_linear_function_has_no_complement():
    with pytest.raises(DivergentSupremum):
        Power(1.0).complementary()


@pytest.mark.parametrize("spec", REGISTRY)
def test_young_inequalities(spec):
    phi = parse_young(spec)
    bar = phi.complementary()
    t = np.geomspace(1e-3, 1e3, 60)
    prod = phi.inverse(t) * bar.inverse(t)
    assert np.all(prod >= t * (1 - 1e-6))
    assert np.all(prod <= 2 * t * (1 + 1e-6))
    assert np.all(bar(phi(t) / t) <= phi(t) * (1 + 1e-6))


def test_table_young_function():
    t = np.geomspace(1e-2, 1e2, 30)
    tab = Table(t, t ** 2.5, id="tab")
    assert tab(3.0) == pytest.approx(3.0 ** 2.5, rel=1e-6)
    assert tab(1e3) == pytest.approx(1e3 ** 2.5, rel=1e-6)  # power extrapolation
    with pytest.raises(ValueError):
        Table(t, -t)


# ---------------------------------------------------------------------------
# Luxemburg norms


def lux_oracle(v, w, phi):
    """Scalar bisection on the defining inequality, independent of the package."""
    tot = w.sum()
    avg = lambda lam: float(np.sum(w * phi(np.abs(v) / lam)) / tot)
    lo, hi = 1e-12, 1.0
    while avg(hi) > 1:
        hi *= 2
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if avg(mid) <= 1:
            hi = mid
        else:
            lo = mid
    return hi


def test_luxemburg_power_case(rng):
    d = DomainSpec(1, 2.0, 64)
    for p in [1.0, 1.5, 2.0, 3.7]:
        for _ in range(5):
            f = random_gf(d, rng)
            lo = rng.uniform(-2, 1)
            box = ((lo, lo + rng.uniform(0.3, 1.0)),)
            w = cell_overlaps(d, box)
            direct = (np.sum(w * np.abs(f.samples) ** p) / w.sum()) ** (1 / p)
            assert luxemburg_norm(f, box, Power(p)) == pytest.approx(direct, rel=1e-8)


@pytest.mark.parametrize("spec", REGISTRY)
def test_luxemburg_constant(spec):
    d = DomainSpec(1, 2.0, 32)
    phi = parse_young(spec)
    val = luxemburg_norm(GridFunction.constant(d, 2.5), ((-1.0, 0.5),), phi)
    assert val == pytest.approx(2.5 / phi.inverse(1.0), rel=1e-9)


@pytest.mark.parametrize("spec", REGISTRY)
def test_luxemburg_indicator(spec):
    d = DomainSpec(1, 2.0, 32)
    phi = parse_young(spec)
    f = GridFunction.from_callable(d, lambda x: ((x >= 0) & (x < 0.5)).astype(float))
    box = ((-1.0, 1.0),)  # |E|/|B| = 1/4
    expect = 1.0 / phi.inverse(4.0)
    val = luxemburg_norm(f, box, phi)
    assert val == pytest.approx(expect, rel=1e-9)
    v = f.samples
    w = cell_overlaps(d, box)
    assert val == pytest.approx(lux_oracle(v[w > 0], w[w > 0], phi), rel=1e-9)


def test_luxemburg_random_vs_oracle(rng):
    d = DomainSpec(1, 2.0, 32)
    for spec in ["logbump:2:1", "loglogbump:3:0.5", "dual:logbump:2:1"]:
        phi = parse_young(spec)
        f = random_gf(d, rng)
        v, w = f.samples, np.full(32, d.h)
        assert luxemburg_values(v, w, phi) == pytest.approx(lux_oracle(v, w, phi), rel=1e-9)


def test_holder_orlicz_small(rng):
    d = DomainSpec(1, 2.0, 32)
    for spec in ["power:2", "logbump:2:1"]:
        A = parse_young(spec)
        Ab = A.complementary()
        for _ in range(10):
            f, g = random_gf(d, rng), random_gf(d, rng)
            box = ((-1.5, 1.0),)
            w = cell_overlaps(d, box)
            lhs = np.sum(w * np.abs(f.samples * g.samples)) / w.sum()
            assert lhs <= 2 * luxemburg_norm(f, box, A) * luxemburg_norm(g, box, Ab) * (1 + 1e-9)


# ---------------------------------------------------------------------------
# B_p


@pytest.mark.parametrize("q,p", [(1.0, 2.0), (1.5, 2.0), (2.0, 3.5), (3.0, 4.0)])
def test_bp_power_closed_form(q, p):
    res = bp_constant(Power(q), p)
    assert res.finite
    assert res.value == pytest.approx(1.0 / (p - q), rel=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_bp_power_divergent(p):
    assert bp_constant(Power(p), p).divergent


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("kind", [LogBump, LogLogBump])
def test_bp_log_bumps_complements_finite(p, kind):
    pp = p / (p - 1)
    A, B = kind(p, 1.0), kind(pp, 1.0)
    assert bp_constant(A.complementary(), pp).finite
    assert bp_constant(B.complementary(), p).finite


def test_bp_borderline_loglog_divergent():
    assert bp_constant(LogLogBump(2.0, 0.0).complementary(), 2.0).divergent


def test_bp_rejects_p_le_one():
    with pytest.raises(ValueError):
        bp_constant(Power(2.0), 1.0)


# ---------------------------------------------------------------------------
# Orlicz maximal operator


def test_orlicz_maximal_power_one_is_hardy_littlewood(rng):
    d = DomainSpec(1, 2.0, 64)
    f = random_gf(d, rng)
    assert np.allclose(orlicz_maximal(f, Power(1.0)).samples, maximal_function(f), rtol=1e-12)


@pytest.mark.parametrize("spec", ["power:2", "logbump:2:1"])
def test_orlicz_maximal_constant(spec):
    d = DomainSpec(1, 2.0, 32)
    phi = parse_young(spec)
    out = orlicz_maximal(GridFunction.constant(d, 1.3), phi).samples
    assert np.allclose(out, 1.3 / phi.inverse(1.0), rtol=1e-9)


def test_orlicz_maximal_exhaustive(rng):
    d = DomainSpec(1, 2.0, 16)
    f = random_gf(d, rng)
    phi = parse_young("logbump:2:1")
    oracle = np.zeros(d.shape)
    for box in all_boxes(default_system(d)):
        w = cell_overlaps(d, box)
        keep = w > 0
        val = lux_oracle(f.samples[keep], w[keep], phi)
        oracle = np.where(keep, np.maximum(oracle, val), oracle)
    assert np.allclose(orlicz_maximal(f, phi).samples, oracle, rtol=1e-9)
