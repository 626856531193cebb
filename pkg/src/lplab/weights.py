"""Weight functionals over the enumerated dyadic cubes.

Every ``sup_Q`` below runs over the cubes of a DyadicSystem (all 3^n shifted
grids by default), so values are lower bounds for the continuous suprema.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .dyadic import (DyadicCube, DyadicSystem, Tiling, default_system, distribution, maximal_function,
                     restricted_maximal_integrals)
from .errors import HypothesisViolation, NonSummable
from .gridfn import DomainSpec, GridFunction, box_weights, lp_norm
from .orlicz import YoungFunction, bp_constant, luxemburg_tiling


@dataclass(frozen=True)
class ExponentVector:
    """(p_1, …, p_m) with 1/p = Σ 1/p_i. Entries equal to 1 are allowed (A_1 conventions)."""

    ps: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ps", tuple(float(q) for q in self.ps))
        if not self.ps or any(not q >= 1 for q in self.ps):
            raise ValueError("exponents must be ≥ 1")

    @property
    def m(self) -> int:
        return len(self.ps)

    @property
    def p(self) -> float:
        return 1.0 / sum(1.0 / q for q in self.ps)

    @property
    def conj(self) -> tuple[float, ...]:
        return tuple(math.inf if q == 1 else q / (q - 1) for q in self.ps)

    def scaled(self, r: float) -> "ExponentVector":
        return ExponentVector(tuple(r * q for q in self.ps))

    def two_over_conj(self) -> tuple[float, ...]:
        """The vector (2/p_1', …, 2/p_m', 2/p) used by the entropy constants."""
        return tuple(2.0 / c for c in self.conj) + (2.0 / self.p,)

    def with_dual(self) -> "ExponentVector":
        """(p_1, …, p_m, p')."""
        p = self.p
        if not p > 1:
            raise ValueError("p must exceed 1 to append p'")
        return ExponentVector(self.ps + (p / (p - 1),))


class EntropyGauge:
    """Increasing ε on (1, ∞) with ∫_1^∞ dt/(ε(t) t) < ∞.

    Evaluated through ``of_log(s) = ε(e^s)`` so that the convergence test can
    probe very large t. The registry gauge is ε(t) = (1 + log t)^{1+η}.
    """

    def __init__(self, eta: float | None = None, of_log: Callable | None = None, id: str | None = None):
        if of_log is None:
            if eta is None or not eta > 0:
                raise ValueError("registry gauge needs η > 0")
            self.eta = float(eta)
            self.of_log = lambda s: (1.0 + np.asarray(s, dtype=float)) ** (1.0 + self.eta)
            self.id = id or f"log:{eta:g}"
        else:
            self.eta = None
            self.of_log = of_log
            self.id = id or "custom"

    def __call__(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 1.0)
        out = self.of_log(np.log(t))
        return out if np.ndim(out) else float(out)

    def is_monotone(self) -> bool:
        s = np.log(np.geomspace(1.0, 1e12, 400))
        return bool(np.all(np.diff(self.of_log(s)) >= 0))

    def certificate(self, eps: float = 0.02) -> tuple[bool, float]:
        """(converged, value) for ∫_0^∞ ds/ε(e^s), with a power-tail extrapolation."""
        g = lambda s: 1.0 / float(self.of_log(s))
        U = 1e6
        # substitute s = e^v - 1 to follow the slow decay
        head = integrate.quad(lambda v: g(math.expm1(v)) * math.exp(v), 0.0, math.log1p(U), limit=400)[0]
        slope = (math.log(g(U)) - math.log(g(U / 100))) / math.log(100)
        if slope >= -1 - eps:
            return False, math.inf
        return True, head + g(U) * U / (-slope - 1)


def gauge_from_id(spec: str) -> EntropyGauge:
    kind, _, arg = spec.partition(":")
    if kind == "log":
        return EntropyGauge(float(arg))
    raise KeyError(f"unknown gauge {spec!r}")


# ---------------------------------------------------------------------------
# helpers


def _samples(w) -> np.ndarray:
    return w.samples if isinstance(w, GridFunction) else np.asarray(w, dtype=float)


def _sup(system: DyadicSystem, per_tiling: Callable[[Tiling], np.ndarray]) -> float:
    best = -math.inf
    for t in system.tilings():
        v = np.asarray(per_tiling(t), dtype=float)
        v = v[~np.isnan(v)]
        if v.size:
            best = max(best, float(v.max()))
    return best


def _pow(x, a):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(x > 0, np.abs(x) ** a, 0.0 if a > 0 else np.inf)


def _system(w, system):
    dom = w.domain if isinstance(w, GridFunction) else w[0].domain
    return default_system(dom) if system is None else system


# ---------------------------------------------------------------------------
# A_p type functionals


def ap_functional(avg_w: np.ndarray, avg_dual: np.ndarray, p: float) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return avg_w * avg_dual ** (p - 1)


def ap_constant(w: GridFunction, p: float, system: DyadicSystem | None = None) -> float:
    """[w]_{A_p} over enumerated cubes; p = 1 uses ess-inf, p = inf gives [w]'_{A∞}.

    Args:
        w: weight.
        p: exponent in [1, ∞].
        system: cube enumeration (defaults to all shifted grids).

    Returns:
        The supremum of the defining functional (a lower bound for the true one).
    """
    system = _system(w, system)
    s = _samples(w)
    if math.isinf(p):
        return a_inf_prime(w, system)
    if p == 1:
        def per(t):
            mn = t.cube_min(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(mn > 0, t.cube_averages(s) / mn, np.inf)
        return _sup(system, per)
    if p < 1:
        raise ValueError("p must be ≥ 1")
    dual = _pow(s, 1.0 / (1.0 - p))
    if not np.all(np.isfinite(dual)):
        return math.inf
    return _sup(system, lambda t: ap_functional(t.cube_averages(s), t.cube_averages(dual), p))


def ap_on_cube(w: GridFunction, p: float, Q) -> float:
    """The A_p functional on a single cube or box."""
    box = Q.box if isinstance(Q, DyadicCube) else tuple(Q)
    v, m = distribution(w, box)
    avg = np.sum(v * m) / m.sum()
    if p == 1:
        return float(avg / v.min()) if v.min() > 0 else math.inf
    dual = np.sum(_pow(v, 1.0 / (1.0 - p)) * m) / m.sum()
    return float(avg * dual ** (p - 1))


def a_inf_prime(w: GridFunction, system: DyadicSystem | None = None) -> float:
    """sup_Q (1/w(Q)) ∫_Q M(w 1_Q)."""
    system = _system(w, system)
    s = _samples(w)
    best = 0.0
    for t, ints in restricted_maximal_integrals([s], [1.0], w.domain, system):
        wq = t.cube_integrals(s)
        ok = wq > 0
        if ok.any():
            best = max(best, float(np.max(ints[ok] / wq[ok])))
    return best


def nu_weight(ws: Sequence[GridFunction], pv: ExponentVector) -> GridFunction:
    """ν = ∏ w_i^{p/p_i}."""
    if len(ws) != pv.m:
        raise ValueError("need one weight per exponent")
    p = pv.p
    out = np.ones(ws[0].domain.shape)
    for w, q in zip(ws, pv.ps):
        out = out * _samples(w) ** (p / q)
    return GridFunction(ws[0].domain, out, weight=True)


def multi_ap_constant(ws: Sequence[GridFunction], pv: ExponentVector, system: DyadicSystem | None = None) -> float:
    """[w⃗]_{A_p⃗} = sup ⟨ν⟩^{1/p} ∏ ⟨w_i^{1-p_i'}⟩^{1/p_i'}, with (inf w_i)^{-1} when p_i = 1."""
    system = _system(ws, system)
    nu = nu_weight(ws, pv).samples
    p = pv.p
    duals = []
    for w, q in zip(ws, pv.ps):
        if q == 1:
            duals.append(None)
        else:
            d = _pow(_samples(w), 1.0 / (1.0 - q))
            if not np.all(np.isfinite(d)):
                return math.inf
            duals.append(d)

    def per(t):
        val = t.cube_averages(nu) ** (1.0 / p)
        for w, q, d in zip(ws, pv.ps, duals):
            if d is None:
                mn = t.cube_min(_samples(w))
                with np.errstate(divide="ignore"):
                    val = val / mn
            else:
                val = val * t.cube_averages(d) ** (1.0 - 1.0 / q)
        return val

    return _sup(system, per)


# ---------------------------------------------------------------------------
# bump conditions


def check_bump_hypotheses(A: YoungFunction | None, Bs: Sequence[YoungFunction], pv: ExponentVector) -> dict:
    """B̄_j ∈ B_{p_j} and, for p > 2, Ā ∈ B_{(p/2)'}; raises HypothesisViolation otherwise."""
    report = {}
    for j, (B, q) in enumerate(zip(Bs, pv.ps)):
        res = bp_constant(B.complementary(), q)
        report[f"B{j + 1}"] = res.value
        if res.divergent:
            raise HypothesisViolation(f"complement of {B.id} is not in B_{q:g}")
    p = pv.p
    if p > 2:
        if A is None:
            raise HypothesisViolation("p > 2 needs a bump A")
        q = (p / 2) / (p / 2 - 1)
        res = bp_constant(A.complementary(), q)
        report["A"] = res.value
        if res.divergent:
            raise HypothesisViolation(f"complement of {A.id} is not in B_{q:g}")
    return report


def bump_norm(u: GridFunction, vs: Sequence[GridFunction], A: YoungFunction | None, Bs: Sequence[YoungFunction],
              pv: ExponentVector, system: DyadicSystem | None = None, validate: bool = True) -> float:
    """‖(u, v⃗)‖_{A,B⃗,p⃗}; the p ≤ 2 branch uses ‖u^{1/p}‖_{p,Q} and ignores A."""
    if validate:
        check_bump_hypotheses(A, Bs, pv)
    system = _system(u, system)
    p = pv.p
    us = _samples(u)
    vinv = [_pow(_samples(v), -1.0 / q) for v, q in zip(vs, pv.ps)]
    if any(not np.all(np.isfinite(x)) for x in vinv):
        return math.inf
    low = p <= 2
    ua = us if low else us ** (2.0 / p)

    def per(t):
        val = t.cube_averages(us) ** (1.0 / p) if low else np.sqrt(luxemburg_tiling(ua, t, A))
        for x, B in zip(vinv, Bs):
            val = val * luxemburg_tiling(x, t, B)
        return val

    return _sup(system, per)


def two_weight_functionals(u: GridFunction, v: GridFunction, A: YoungFunction, B: YoungFunction, p: float,
                           system: DyadicSystem | None = None) -> dict:
    """Double bump, both separated bumps and the two-weight A_p constant."""
    from .orlicz import Power

    system = _system(u, system)
    pp = p / (p - 1)
    a = _samples(u) ** (1.0 / p)
    b = _pow(_samples(v), -1.0 / p)
    out = {"double": -math.inf, "sepA": -math.inf, "sepB": -math.inf, "ap": -math.inf}
    P, PP = Power(p), Power(pp)
    for t in system.tilings():
        aA, ap_ = luxemburg_tiling(a, t, A), luxemburg_tiling(a, t, P)
        bB, bp_ = luxemburg_tiling(b, t, B), luxemburg_tiling(b, t, PP)
        out["double"] = max(out["double"], float(np.max(aA * bB)))
        out["sepA"] = max(out["sepA"], float(np.max(aA * bp_)))
        out["sepB"] = max(out["sepB"], float(np.max(ap_ * bB)))
        out["ap"] = max(out["ap"], float(np.max(ap_ * bp_)))
    return out


# ---------------------------------------------------------------------------
# entropy bumps


def rho_nu(nu: GridFunction, system: DyadicSystem | None = None) -> list[tuple[Tiling, np.ndarray]]:
    """ρ_ν(Q) = ∫_Q M(ν 1_Q) / ν(Q) for every enumerated cube."""
    system = _system(nu, system)
    s = _samples(nu)
    out = []
    for t, ints in restricted_maximal_integrals([s], [1.0], nu.domain, system):
        with np.errstate(divide="ignore", invalid="ignore"):
            out.append((t, ints / t.cube_integrals(s)))
    return out


def rho_sigma(sigmas: Sequence[GridFunction], exps: Sequence[float], system: DyadicSystem | None = None,
              power: float = 1.0) -> list[tuple[Tiling, np.ndarray]]:
    """(∫_Q sup_{Q'} ∏⟨σ_i 1_Q⟩_{Q'}^{a_i} / ∫_Q ∏σ_i^{a_i})^power for every enumerated cube."""
    system = _system(sigmas, system)
    dom = sigmas[0].domain
    ss = [_samples(s) for s in sigmas]
    prod = np.ones(dom.shape)
    for s, a in zip(ss, exps):
        prod = prod * s ** a
    out = []
    for t, ints in restricted_maximal_integrals(ss, exps, dom, system):
        with np.errstate(divide="ignore", invalid="ignore"):
            out.append((t, (ints / t.cube_integrals(prod)) ** power))
    return out


def entropy_bump(sigmas: Sequence[GridFunction], nu: GridFunction, pv: ExponentVector, r: float,
                 eps: EntropyGauge, system: DyadicSystem | None = None) -> float:
    """⌊σ⃗, ν⌋_{p⃗,r,ε} = sup ∏⟨σ_i⟩^{p/p_i'} ⟨ν⟩ ρ_{σ⃗,p⃗,ε}(Q) ρ_{ν,ε}(Q)^{p/r-1}."""
    system = _system(nu, system)
    p = pv.p
    rs = rho_sigma(sigmas, [p / q for q in pv.ps], system)
    rn = rho_nu(nu, system)
    ss = [_samples(s) for s in sigmas]
    nus = _samples(nu)
    best = -math.inf
    for (t, a), (_, b) in zip(rs, rn):
        val = t.cube_averages(nus) * a * eps(a) * (b * eps(b)) ** (p / r - 1.0)
        for s, c in zip(ss, pv.conj):
            val = val * t.cube_averages(s) ** (p / c)
        val = val[np.isfinite(val)]
        if val.size:
            best = max(best, float(val.max()))
    return best


def entropy_bump_general(sigmas: Sequence[GridFunction], q: Sequence[float], pv: ExponentVector, rho: EntropyGauge,
                         theta: float, j: int, system: DyadicSystem | None = None) -> float:
    """⌊σ⃗⌋_{q⃗,p⃗,ρ,θ,j} with X(Q) = (∫_Q M^{(1/(θp_i))_{i≠j}}(σ⃗1_Q) / ∫_Q ∏_{i≠j} σ_i^{1/(θp_i)})^θ.

    ``j`` is 1-based, as in the notation; ⟨σ_i⟩ are taken on the same cube Q.
    """
    if not (len(sigmas) == len(q) == pv.m):
        raise ValueError("σ⃗, q⃗ and p⃗ must have the same length")
    system = _system(sigmas, system)
    keep = [i for i in range(pv.m) if i != j - 1]
    X = rho_sigma([sigmas[i] for i in keep], [1.0 / (theta * pv.ps[i]) for i in keep], system, power=theta)
    ss = [_samples(s) for s in sigmas]
    best = -math.inf
    for t, x in X:
        val = x * rho(x)
        for s, qi in zip(ss, q):
            val = val * t.cube_averages(s) ** qi
        val = val[np.isfinite(val)]
        if val.size:
            best = max(best, float(val.max()))
    return best


def sparse_entropy_constant(sigmas: Sequence[GridFunction], nu: GridFunction, pv: ExponentVector, r: float,
                            eps: EntropyGauge, system: DyadicSystem | None = None) -> float:
    """Constant of the sparse bound ‖A_S^r(f⃗σ⃗)‖_{L^p(ν)} ≲ N ∏‖f_i‖_{L^{p_i}(σ_i)}.

    For p > r this is ⌊σ⃗, ν⌋_{p⃗,r,ε}^{1/p}; for p ≤ r it is
    ⌊(σ⃗, ν)⌋_{r/p⃗', (p⃗, p'), ε, r/p, m+1}^{1/r}.
    """
    p = pv.p
    if p > r:
        return entropy_bump(sigmas, nu, pv, r, eps, system) ** (1.0 / p)
    if not p > 1:
        raise ValueError("the p ≤ r entropy constant needs p > 1")
    q = tuple(r / c for c in pv.conj) + (r / p,)
    val = entropy_bump_general(list(sigmas) + [nu], q, pv.with_dual(), eps, r / p, pv.m + 1, system)
    return val ** (1.0 / r)


def entropy_constant(sigmas: Sequence[GridFunction], nu: GridFunction, pv: ExponentVector, eps: EntropyGauge,
                     system: DyadicSystem | None = None) -> float:
    """The constant N_{p⃗,ε} multiplying the entropy-bump square-function bounds (the r = 2 case)."""
    return sparse_entropy_constant(sigmas, nu, pv, 2.0, eps, system)


# ---------------------------------------------------------------------------
# T_u and Rubio de Francia


def t_u(f: GridFunction, u: GridFunction, system: DyadicSystem | None = None) -> GridFunction:
    """T_u f = M(f u)/u where u ≠ 0, and 0 elsewhere."""
    us = _samples(u)
    M = maximal_function(f.samples * us, system, f.domain)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(us != 0, M / np.where(us != 0, us, 1.0), 0.0)
    return GridFunction(f.domain, out)


@dataclass
class RdfResult:
    Rh: GridFunction
    normalizer: float
    growth_norm: float
    growth_pointwise: float
    terms: int
    tail_bound: float
    h_norm: float
    Rh_norm: float

    def summary(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "Rh"}


def rubio_de_francia(h: GridFunction, mode: str = "maximal", r_prime: float = 2.0, K: int = 24,
                     u: GridFunction | None = None, normalizer: float | None = None,
                     norm_weight: GridFunction | None = None, system: DyadicSystem | None = None) -> RdfResult:
    """Rh = Σ_{k<K} T^k h / (2N)^k with T = M (mode "maximal") or T = T_u (mode "t_u").

    The normalizer N must dominate both the per-step L^{r'} growth of the
    iterates (this gives ‖Rh‖ ≤ 2‖h‖) and the pointwise growth
    max T^{k+1}h / T^k h for k ≥ 1 (this gives T(Rh) ≤ 2N·Rh for the
    truncated sum, hence [Rh]_{A_1} ≤ 2N in the maximal mode). By default
    N = max(2 × norm growth, pointwise growth).
    """
    if K < 2:
        raise ValueError("need at least two terms")
    if np.any(h.samples < 0):
        raise ValueError("h must be nonnegative")
    if mode == "maximal":
        step = lambda g: maximal_function(g, system, h.domain)
    elif mode == "t_u":
        if u is None:
            raise ValueError("t_u mode needs u")
        step = lambda g: t_u(GridFunction(h.domain, g), u, system).samples
    else:
        raise ValueError(f"unknown mode {mode!r}")
    norm = lambda g: lp_norm(GridFunction(h.domain, g), r_prime, norm_weight)
    h_norm = norm(h.samples)
    if h_norm == 0:
        zero = GridFunction(h.domain, np.zeros(h.domain.shape), weight=True)
        return RdfResult(zero, normalizer or 1.0, 0.0, 0.0, K, 0.0, 0.0, 0.0)
    it = [np.asarray(h.samples, dtype=float)]
    for _ in range(K):
        it.append(step(it[-1]))
    norms = [norm(g) for g in it]
    g_norm = max(b / a for a, b in zip(norms[:-1], norms[1:]) if a > 0)
    g_pt = 0.0
    for a, b in zip(it[1:-1], it[2:]):
        pos = a > 0
        if pos.any():
            g_pt = max(g_pt, float(np.max(b[pos] / a[pos])))
        if np.any(b[~pos] > 0):
            g_pt = math.inf
    if normalizer is None:
        normalizer = max(2.0 * g_norm, g_pt)
    elif normalizer < g_norm or normalizer < g_pt:
        raise NonSummable(f"normalizer {normalizer:g} below observed growth ({g_norm:g}, {g_pt:g})")
    if not math.isfinite(normalizer):
        raise NonSummable("pointwise growth is unbounded")
    Rh = sum(g / (2.0 * normalizer) ** k for k, g in enumerate(it[:K]))
    tail = 2.0 ** (-K + 1) * h_norm
    return RdfResult(GridFunction(h.domain, Rh, weight=True), float(normalizer), float(g_norm), float(g_pt), K,
                     float(tail), float(h_norm), float(norm(Rh)))


# ---------------------------------------------------------------------------
# generators


def generate_weight(kind: str, domain: DomainSpec, **params) -> GridFunction:
    """Weight corpus generators: "power", "checker", "a1_from_rdf"."""
    n = domain.n
    if kind == "power":
        a = float(params.get("a", 0.0))
        center = np.asarray(params.get("center", [0.0] * n), dtype=float)
        p = params.get("p")
        margin = 0.1
        if not a > -n + margin or (p is not None and not a < n * (float(p) - 1) - margin):
            raise ValueError(f"power exponent {a} outside the admissible range")
        xs = domain.center_grid()
        r = np.sqrt(sum((x - c) ** 2 for x, c in zip(xs, center)))
        r = np.maximum(r, domain.h / 4)
        return GridFunction(domain, r ** a, weight=True)
    if kind == "checker":
        a, b = float(params["a"]), float(params["b"])
        if not (a > 0 and b > 0):
            raise ValueError("checker values must be positive")
        xs = domain.center_grid()
        neg = xs[0] < 0 if n == 1 else (xs[0] < 0) ^ (xs[1] < 0)
        return GridFunction(domain, np.where(neg, a, b), weight=True)
    if kind == "a1_from_rdf":
        res = rdf_weight(domain, int(params.get("seed", 0)), float(params.get("r_prime", 2.0)))
        return res.Rh
    raise KeyError(f"unknown weight kind {kind!r}")


def rdf_weight(domain: DomainSpec, seed: int, r_prime: float = 2.0, K: int = 24) -> RdfResult:
    """Rubio de Francia iteration applied to a seeded Gaussian bump."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(-domain.L / 2, domain.L / 2, size=domain.n)
    s = rng.uniform(domain.L / 16, domain.L / 4)
    xs = domain.center_grid()
    h = np.exp(-sum((x - ci) ** 2 for x, ci in zip(xs, c)) / (2 * s * s))
    return rubio_de_francia(GridFunction(domain, h), "maximal", r_prime, K)


def weight_corpus(manifest: list[dict], domain: DomainSpec) -> list[GridFunction]:
    """Build weights from a JSON-style list of {kind, params, seed}."""
    out = []
    for item in manifest:
        params = dict(item.get("params", {}))
        if "seed" in item:
            params.setdefault("seed", item["seed"])
        out.append(generate_weight(item["kind"], domain, **params))
    return out


def append_functional_csv(path, rows: list[dict]) -> None:
    """Append rows with columns (functional, params, value, cubes_enumerated)."""
    import os

    new = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        wr = csv.writer(fh)
        if new:
            wr.writerow(["functional", "params", "value", "cubes_enumerated"])
        for r in rows:
            wr.writerow([r["functional"], json.dumps(r.get("params", {}), sort_keys=True), repr(float(r["value"])),
                         int(r["cubes_enumerated"])])
