import math

import numpy as np
import pytest

from conftest import all_boxes, cell_overlaps, random_gf
from lplab.dyadic import SparseFamily, cube_containing, default_system, top_cube, verify_sparse
from lplab.gridfn import DomainSpec, GridFunction
from lplab.sqfn import (BumpProfile, ConeQuadrature, energy_field, g_star, gss_bound, kernel_from_id,
                        kernel_validate, oscillation_ratio, maximal, psi_t_apply, psi_t_direct, s_alpha, s_tilde,
                        sparse_operator, stopping_family)

D1 = DomainSpec(1, 2.0, 32)
Q1 = ConeQuadrature(D1.h, 8.0, 16)


def pair(rng, dom=D1):
    return [random_gf(dom, rng), random_gf(dom, rng)]


# ---------------------------------------------------------------------------
# kernels


def test_kernel_registry():
    k = kernel_from_id("cancel:3:2")
    assert (k.m, k.n, k.cancel) == (3, 2, True)
    with pytest.raises(KeyError):
        kernel_from_id("gauss:2:1")
    with pytest.raises(ValueError):
        kernel_from_id("cancel:2:3")


def test_kernel_validate_zero():
    rep = kernel_validate(kernel_from_id("zero:2:1"))
    assert rep.passed and rep.A_obs == 0.0


@pytest.mark.parametrize("kid", ["cancel:2:1", "nocancel:2:1", "cancel:3:1", "cancel:2:2"])
def test_kernel_validate_smooth(kid):
    rep = kernel_validate(kernel_from_id(kid), samples=2000)
    assert rep.passed
    assert rep.A_obs <= rep.A_certified


def test_kernel_validate_jump_fails():
    rep = kernel_validate(kernel_from_id("jump:2:1"), samples=2000)
    assert not rep.passed
    assert rep.blowup > 10


def test_kernel_support():
    k = kernel_from_id("cancel:2:2")
    x = np.zeros((1, 2))
    ys = np.array([[[0.8, 0.8], [0.0, 0.0]]])  # |x − y₁| > 1
    assert k(x, ys)[0] == 0.0


# ---------------------------------------------------------------------------
# ψ_t


def test_psi_zero_input(rng):
    k = kernel_from_id("cancel:2:1")
    fs = [GridFunction.constant(D1, 0.0), random_gf(D1, rng)]
    assert np.all(psi_t_apply(k, fs, 0.5).samples == 0)
    with pytest.raises(ValueError):
        psi_t_apply(k, fs, 0.0)


def test_psi_multilinear(rng):
    k = kernel_from_id("nocancel:2:1")
    f, g, f2 = (random_gf(D1, rng) for _ in range(3))
    a, b = 1.7, -0.4
    comb = GridFunction(D1, a * f.samples + b * f2.samples)
    lhs = psi_t_apply(k, [comb, g], 0.3).samples
    rhs = a * psi_t_apply(k, [f, g], 0.3).samples + b * psi_t_apply(k, [f2, g], 0.3).samples
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("kid", ["cancel:2:1", "nocancel:2:1", "cancel:3:1"])
@pytest.mark.parametrize("t", [0.02, 0.1, 0.5, 3.0])
def test_psi_direct_oracle(rng, kid, t):
    k = kernel_from_id(kid)
    fs = [random_gf(D1, rng) for _ in range(k.m)]
    fast = psi_t_apply(k, fs, t).samples
    slow = psi_t_direct(k, fs, t)
    # for t < h the cancelling profile integrates to zero inside a cell; floor by the input size
    scale = max(np.max(np.abs(slow)), np.prod([np.max(np.abs(f.samples)) for f in fs]))
    assert np.max(np.abs(fast - slow)) <= 1e-11 * scale


def test_psi_cancellation_on_constants():
    # ∫ψ₀ = 0, so constants give zero once the support sits inside the domain
    d = DomainSpec(1, 4.0, 64)
    k = kernel_from_id("cancel:2:1")
    one = GridFunction.constant(d, 1.0)
    vals = psi_t_apply(k, [one, one], 0.5).samples
    inner = np.abs(d.centers()) < 3.0
    assert np.max(np.abs(vals[inner])) < 1e-12
    nc = psi_t_apply(kernel_from_id("nocancel:2:1"), [one, one], 0.5).samples
    assert np.min(nc[inner]) > 0.1


# ---------------------------------------------------------------------------
# cone operators


def _cone_oracle(fs, k, quad, weight):
    """Σ over nodes (reverse order) and y of c_t W(|x−y|, t) |ψ_t|² with ψ_t from the direct route."""
    dom = fs[0].domain
    xs = dom.centers()
    out = np.zeros(dom.N)
    for t in quad.nodes()[::-1]:
        E = psi_t_direct(k, fs, t) ** 2
        c = dom.h * quad.dlog / t
        for i, x in enumerate(xs):
            for j in range(dom.N - 1, -1, -1):
                out[i] += c * weight(abs(x - xs[j]), t) * E[j]
    return np.sqrt(out)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
def test_s_alpha_oracle(rng, alpha):
    k = kernel_from_id("cancel:2:1")
    fs = pair(rng)
    fast = s_alpha(fs, alpha, Q1, k).samples
    slow = _cone_oracle(fs, k, Q1, lambda r, t: float(r < alpha * t))
    assert np.allclose(fast, slow, rtol=1e-10, atol=1e-14 * slow.max())


def test_g_star_oracle(rng):
    k = kernel_from_id("nocancel:2:1")
    fs = pair(rng)
    lam = 1.5
    fast = g_star(fs, lam, Q1, k).samples
    slow = _cone_oracle(fs, k, Q1, lambda r, t: (t / (t + r)) ** lam)
    assert np.allclose(fast, slow, rtol=1e-10)


def test_s_alpha_fft_path_matches_dense(rng):
    # 2D grid with more than 1024 cells takes the FFT path
    d = DomainSpec(2, 2.0, 64)
    k = kernel_from_id("cancel:2:2")
    fs = pair(rng, d)
    quad = ConeQuadrature(d.h, 1.0, 4)
    field = energy_field(k, fs, quad)
    fast = s_alpha(field, 1.0).samples ** 2
    pts = np.stack([g.ravel() for g in d.center_grid()], -1)
    probe = [0, 777, 2080, 4095]
    for p in probe:
        dist = np.sqrt(np.sum((pts - pts[p]) ** 2, -1))
        val = sum(field.c[i] * np.sum((dist < field.t[i]) * field.E[i].ravel()) for i in range(len(field.t)))
        assert fast.ravel()[p] == pytest.approx(val, rel=1e-9, abs=1e-14)


def test_s_alpha_monotone(rng):
    k = kernel_from_id("cancel:2:1")
    field = energy_field(k, pair(rng), Q1)
    prev = np.zeros(D1.shape)
    for a in [0.25, 0.5, 1.0, 2.0, 4.0]:
        cur = s_alpha(field, a).samples
        assert np.all(cur >= prev - 1e-12 * cur.max())
        prev = cur
    with pytest.raises(ValueError):
        s_alpha(field, 0.0)


def test_operator_chains(rng):
    k = kernel_from_id("cancel:2:1")
    field = energy_field(k, pair(rng), Q1)
    lam = 2.0
    g = g_star(field, lam).samples
    s1 = s_alpha(field, 1.0).samples
    assert np.all(2.0 ** (-lam / 2) * s1 <= g * (1 + 1e-9))
    gb = gss_bound(field, lam, K=12)
    assert np.all(gb.g.samples <= gb.bound * (1 + 1e-9))
    st = s_tilde(field, 1.0).samples
    s2 = s_alpha(field, 2.0).samples
    assert np.all(s1 <= st * (1 + 1e-9)) and np.all(st <= s2 * (1 + 1e-9))


def test_s_tilde_upper_profile_is_s_2alpha(rng):
    k = kernel_from_id("cancel:2:1")
    field = energy_field(k, pair(rng), Q1)
    up = s_tilde(field, 0.75, BumpProfile("upper")).samples
    assert np.allclose(up, s_alpha(field, 1.5).samples, rtol=1e-14)
    with pytest.raises(ValueError):
        BumpProfile("box")(0.5)


def test_bump_profile_bounds():
    r = np.linspace(0, 3, 301)
    phi = BumpProfile()(r)
    assert np.all((r < 1) <= phi + 1e-15) and np.all(phi <= (r < 2) + 1e-15)


def test_tail_bound_finite(rng):
    k = kernel_from_id("cancel:2:1")
    field = energy_field(k, pair(rng), Q1)
    assert 0 <= field.tail_bound() < math.inf


# ---------------------------------------------------------------------------
# maximal and sparse


def test_maximal_constants_and_pointwise(rng):
    d = DomainSpec(1, 2.0, 32)
    c = [GridFunction.constant(d, 2.0), GridFunction.constant(d, 3.0)]
    assert np.allclose(maximal(c).samples, 6.0)
    f = random_gf(d, rng)
    assert np.all(maximal([f]).samples >= np.abs(f.samples) * (1 - 1e-12))


def test_maximal_exhaustive(rng):
    d = DomainSpec(1, 2.0, 16)
    fs = [random_gf(d, rng), random_gf(d, rng), random_gf(d, rng)]
    exps = [0.5, 1.0, 2.0]
    best = np.zeros(d.shape)
    for box in all_boxes(default_system(d)):
        w = cell_overlaps(d, box)
        val = 1.0
        for i, (f, e) in enumerate(zip(fs, exps)):
            if i != 1:
                val *= (np.sum(w * np.abs(f.samples)) / w.sum()) ** e
        best = np.where(w > 0, np.maximum(best, val), best)
    assert np.allclose(maximal(fs, exps, skip=1).samples, best, rtol=1e-12)
    with pytest.raises(ValueError):
        maximal(fs, [1.0, -1.0, 1.0])


def test_sparse_operator_single_cube(rng):
    d = DomainSpec(1, 2.0, 32)
    Q = cube_containing(d, (0,), 0, (0.5,))
    fam = SparseFamily(d, (0,), [Q], 0.5)
    fs = [random_gf(d, rng), random_gf(d, rng)]
    inside = Q.contains_points(d.centers())
    a = [np.mean(np.abs(f.samples[inside])) for f in fs]
    out = sparse_operator(fam, 1.0, fs).samples
    assert np.allclose(out[inside], a[0] * a[1], rtol=1e-12)
    assert np.all(out[~inside] == 0)


def test_sparse_operator_oracle_and_r_monotone(rng):
    d = DomainSpec(1, 2.0, 32)
    fs = [random_gf(d, rng, positive=True), random_gf(d, rng, positive=True)]
    fam = stopping_family(fs, C=1.5)
    xs = d.centers()
    prev = None
    for r in [1.0, 1.5, 3.0]:
        acc = np.zeros(d.N)
        for Q in fam.cubes:
            (lo, hi), = Q.box
            ins = (xs > lo) & (xs < hi)
            w = cell_overlaps(d, Q.box)
            prod = np.prod([np.sum(w * np.abs(f.samples)) / w.sum() for f in fs])
            acc += prod ** r * ins
        ref = acc ** (1 / r)
        out = sparse_operator(fam, r, fs).samples
        assert np.allclose(out, ref, rtol=1e-12)
        if prev is not None:
            assert np.all(out <= prev * (1 + 1e-12))  # ℓ^r norms decrease in r
        prev = out
    with pytest.raises(ValueError):
        sparse_operator(fam, 0.5, fs)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_stopping_family_sparse(rng, m):
    d = DomainSpec(1, 4.0, 64)
    fs = [random_gf(d, rng, positive=True, zeros=0.3) for _ in range(m)]
    fam = stopping_family(fs)
    assert fam.cubes[0] == top_cube(d)
    assert verify_sparse(fam, 0.5).passed


def test_oscillation_ratio_forms(rng):
    d = DomainSpec(1, 2.0, 32)
    k = kernel_from_id("cancel:2:1")
    fs = [random_gf(d, rng, positive=True), random_gf(d, rng, positive=True)]
    field = energy_field(k, fs, ConeQuadrature(d.h, 8.0, 12))
    osc = oscillation_ratio(field, 1.0, 0.25)
    sharp = oscillation_ratio(field, 1.0, 0.25, form="sharp")
    assert 0 < sharp <= osc * (1 + 1e-12) < math.inf
    with pytest.raises(ValueError):
        oscillation_ratio(field, 1.0, 0.25, form="plain")
