"""Fast invariant suite behind ``lplab check``."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .. import sqfn
from ..dyadic import audit_decomposition, lerner_hytonen, top_cube, verify_sparse
from ..gridfn import DomainSpec, GridFunction, lp_norm, weak_lp_norm, level_masses
from ..orlicz import REGISTRY, parse_young
from ..weights import ap_constant, rubio_de_francia
from .corpus import generate_corpus


def _corpus(n: int = 4, N: int = 128):
    dom = DomainSpec(1, 8.0, N)
    return dom, generate_corpus({"count": n, "m": 2, "radius": 4.0}, 7, dom)


def weak_norm_identity() -> bool:
    rng = np.random.default_rng(1)
    dom = DomainSpec(1, 8.0, 64)
    for _ in range(10):
        f = GridFunction(dom, rng.normal(size=64))
        p = float(rng.uniform(0.5, 4))
        v, W = level_masses(f)
        direct = max(float(x) * float(np.sum(np.abs(f.samples) >= x) * dom.h) ** (1 / p) for x in v)
        if abs(weak_lp_norm(f, p) - direct) > 1e-12 * direct:
            return False
    return True


def young_bounds() -> bool:
    t = np.geomspace(1e-3, 1e3, 60)
    for spec in REGISTRY:
        phi = parse_young(spec)
        prod = phi.inverse(t) * phi.complementary().inverse(t)
        if np.any(prod < t * (1 - 1e-6)) or np.any(prod > 2 * t * (1 + 1e-6)):
            return False
    return True


def operator_chains() -> bool:
    dom, cases = _corpus()
    k = sqfn.kernel_from_id("cancel:2:1")
    for c in cases:
        F = sqfn.energy_field(k, c.functions, sqfn.ConeQuadrature(dom.h, 4 * dom.L, 32))
        s1, st, s2 = (sqfn.s_alpha(F, 1).samples, sqfn.s_tilde(F, 1).samples, sqfn.s_alpha(F, 2).samples)
        if np.any(s1 > st * (1 + 1e-9)) or np.any(st > s2 * (1 + 1e-9)):
            return False
        G = sqfn.gss_bound(F, 5.0, 20)
        if np.any(G.g.samples > G.bound * (1 + 1e-9)):
            return False
    return True


def sparse_decomposition() -> bool:
    dom, cases = _corpus()
    for c in cases:
        f = c.functions[0]
        Q0 = top_cube(dom)
        m0, fam = lerner_hytonen(f, Q0)
        if not (audit_decomposition(f, Q0, m0, fam)[0] and verify_sparse(fam).passed):
            return False
    return True


def rubio_de_francia_props() -> bool:
    dom = DomainSpec(1, 8.0, 128)
    rng = np.random.default_rng(3)
    for _ in range(3):
        h = GridFunction(dom, np.abs(rng.normal(size=128)))
        res = rubio_de_francia(h, "maximal", 2.0, 16)
        if np.any(res.Rh.samples < h.samples):
            return False
        if res.Rh_norm > 2 * res.h_norm + res.tail_bound * (1 + 1e-9):
            return False
        if ap_constant(res.Rh, 1) > 2 * res.normalizer * (1 + 1e-9):
            return False
    return True


def kernels() -> bool:
    ok = sqfn.kernel_validate(sqfn.kernel_from_id("cancel:2:1")).passed
    return ok and not sqfn.kernel_validate(sqfn.kernel_from_id("jump:2:1")).passed


CHECKS: dict[str, Callable[[], bool]] = {
    "weak_norm_identity": weak_norm_identity,
    "young_bounds": young_bounds,
    "operator_chains": operator_chains,
    "sparse_decomposition": sparse_decomposition,
    "rubio_de_francia": rubio_de_francia_props,
    "kernel_validation": kernels,
}


def run_checks() -> dict[str, bool]:
    out = {}
    for name, fn in CHECKS.items():
        try:
            out[name] = bool(fn())
        except Exception:  # a crash is a failed invariant
            out[name] = False
    return out
