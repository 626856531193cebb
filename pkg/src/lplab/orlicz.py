"""Young functions, complementary functions, Luxemburg norms and M_Φ.

All Young functions are evaluated in log coordinates, ``log_phi(u) = log Φ(e^u)``,
so that very large or very small arguments stay finite. That is what lets
the B_p test probe the integrand far into the tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline, PchipInterpolator

from .dyadic import DyadicSystem, Tiling, default_system, distribution
from .gridfn import GridFunction

E = math.e


class DivergentSupremum(ValueError):
    """The Legendre transform is infinite (Φ grows at most linearly)."""


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _bisect_increasing(fun, target, lo, hi, iters=200, xtol=1e-14):
    """Vectorized root of fun(x) = target for increasing fun, expanding the bracket."""
    target = np.asarray(target, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), target.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), target.shape).copy()
    step = np.maximum(hi - lo, 1.0)
    for _ in range(60):
        bad = fun(lo) > target
        if not bad.any():
            break
        lo = np.where(bad, lo - step, lo)
        step = np.where(bad, step * 2, step)
    step = np.maximum(hi - lo, 1.0)
    for _ in range(60):
        bad = fun(hi) < target
        if not bad.any():
            break
        hi = np.where(bad, hi + step, hi)
        step = np.where(bad, step * 2, step)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = fun(mid) < target
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= xtol * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


class YoungFunction:
    """Base class; subclasses provide ``log_phi`` and an ``id``."""

    id: str = ""
    # growth index used to seed root brackets
    index: float = 2.0

    def log_phi(self, u):
        raise NotImplementedError

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            out = np.exp(self.log_phi(_log(np.where(t > 0, t, 1.0))))
        out = np.where(t > 0, out, 0.0)
        return out if out.ndim else float(out)

    def log_inverse(self, log_s):
        log_s = np.asarray(log_s, dtype=float)
        guess = log_s / self.index
        return _bisect_increasing(self.log_phi, log_s, guess - 4.0, guess + 4.0)

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        out = np.exp(self.log_inverse(_log(np.where(s > 0, s, 1.0))))
        out = np.where(s > 0, out, 0.0)
        return out if out.ndim else float(out)

    def complementary(self) -> "YoungFunction":
        return Complementary(self)

    def __repr__(self):
        return f"YoungFunction({self.id})"


class Power(YoungFunction):
    """Φ(t) = c·t^p."""

    def __init__(self, p: float, c: float = 1.0):
        if p < 1:
            raise ValueError("power Young functions need p ≥ 1")
        self.p, self.c = float(p), float(c)
        self.index = self.p
        self.id = f"power:{p:g}" if c == 1.0 else f"power:{p:g}*{c:.17g}"

    def log_phi(self, u):
        return math.log(self.c) + self.p * np.asarray(u, dtype=float)

    def log_inverse(self, log_s):
        return (np.asarray(log_s, dtype=float) - math.log(self.c)) / self.p

    def complementary(self) -> "YoungFunction":
        p, c = self.p, self.c
        if p == 1:
            raise DivergentSupremum("Φ(t) = ct has an infinite complementary function")
        # stationary point s = (t/(cp))^{1/(p-1)}
        q = p / (p - 1)
        cq = (1 - 1 / p) * (c * p) ** (-1 / (p - 1))
        out = Power(q, cq)
        out.id = f"dual:{self.id}"
        return out


class LogBump(YoungFunction):
    """Φ(t) = t^p log(e + t)^{p - 1 + δ}."""

    def __init__(self, p: float, delta: float):
        if p < 1 or p - 1 + delta < 0:
            raise ValueError("invalid log-bump parameters")
        self.p, self.delta = float(p), float(delta)
        self.index = self.p
        self.id = f"logbump:{p:g}:{delta:g}"

    def log_phi(self, u):
        u = np.asarray(u, dtype=float)
        return self.p * u + (self.p - 1 + self.delta) * np.log(np.logaddexp(1.0, u))


class LogLogBump(YoungFunction):
    """Φ(t) = t^p log(e + t)^{p - 1} loglog(e^e + t)^{p - 1 + δ}."""

    def __init__(self, p: float, delta: float):
        if p < 1 or p - 1 + delta < 0:
            raise ValueError("invalid loglog-bump parameters")
        self.p, self.delta = float(p), float(delta)
        self.index = self.p
        self.id = f"loglogbump:{p:g}:{delta:g}"

    def log_phi(self, u):
        u = np.asarray(u, dtype=float)
        return (self.p * u + (self.p - 1) * np.log(np.logaddexp(1.0, u))
                + (self.p - 1 + self.delta) * np.log(np.log(np.logaddexp(E, u))))


class Table(YoungFunction):
    """Monotone samples (t_i, Φ(t_i)) interpolated in log-log coordinates."""

    def __init__(self, t, values, id: str = "table"):
        t = np.asarray(t, dtype=float)
        v = np.asarray(values, dtype=float)
        if np.any(np.diff(t) <= 0) or np.any(np.diff(v) <= 0) or np.any(v <= 0):
            raise ValueError("table must be strictly increasing and positive")
        self.u, self.lv = np.log(t), np.log(v)
        self._interp = PchipInterpolator(self.u, self.lv, extrapolate=False)
        self.s0 = (self.lv[1] - self.lv[0]) / (self.u[1] - self.u[0])
        self.s1 = (self.lv[-1] - self.lv[-2]) / (self.u[-1] - self.u[-2])
        self.index = max(self.s1, 1.0 + 1e-6)
        self.id = id

    def log_phi(self, u):
        u = np.asarray(u, dtype=float)
        out = self._interp(np.clip(u, self.u[0], self.u[-1]))
        out = np.where(u < self.u[0], self.lv[0] + self.s0 * (u - self.u[0]), out)
        return np.where(u > self.u[-1], self.lv[-1] + self.s1 * (u - self.u[-1]), out)


class Complementary(YoungFunction):
    """Φ̄(t) = sup_s (st - Φ(s)), tabulated on a geometric grid.

    Inside the table the log-log values are spline-interpolated; outside it
    the supremum is computed directly by golden-section search in log s.
    """

    U_LO, U_HI, STEP = -40.0, 40.0, 0.02

    def __init__(self, base: YoungFunction):
        self.base = base
        self.id = f"dual:{base.id}"
        p = getattr(base, "p", base.index)
        self.index = p / (p - 1) if p > 1 else 1e6
        # Φ(s)/s must be unbounded for the supremum to be finite
        grow = base.log_phi(np.array([30.0, 60.0])) - np.array([30.0, 60.0])
        if not grow[1] > grow[0] + 1.0:
            raise DivergentSupremum(f"{base.id} grows at most linearly")
        uu = np.arange(self.U_LO, self.U_HI + self.STEP / 2, self.STEP)
        self._u = uu
        self._spline = CubicSpline(uu, self.direct_log(uu))

    def direct_log(self, u):
        """log Φ̄(e^u) by maximizing log(e^{u+v} - Φ(e^v)) over v = log s."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        base = self.base
        # upper end: Φ(s)/s = t
        v0 = _bisect_increasing(lambda v: base.log_phi(v) - v, u, u / max(self.index - 1, 1e-3) - 5, u / max(self.index - 1, 1e-3) + 5)

        def F(v):
            d = base.log_phi(v) - u - v
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(d < 0, u + v + np.log1p(-np.exp(np.minimum(d, 0.0))), -np.inf)

        width = 12.0
        a, b = v0 - width, v0
        g = (math.sqrt(5) - 1) / 2
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = F(c), F(d)
        for _ in range(90):
            left = fc >= fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            d_new = np.where(left, c, a + g * (b - a))
            c_new = np.where(left, b - g * (b - a), d)
            fd = np.where(left, fc, F(d_new))
            fc = F(c_new)
            c, d = c_new, d_new
        vs = 0.5 * (a + b)
        return F(vs)

    def log_phi(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.U_LO) & (u <= self.U_HI)
        if np.all(inside):
            return self._spline(u)
        out = np.empty_like(u, dtype=float)
        out[inside] = self._spline(u[inside])
        out[~inside] = self.direct_log(u[~inside])
        return out if out.ndim else float(out)


def parse_young(spec: str) -> YoungFunction:
    """Registry: "power:p", "logbump:p:delta", "loglogbump:p:delta", "dual:<id>"."""
    if spec.startswith("dual:"):
        return parse_young(spec[5:]).complementary()
    parts = spec.split(":")
    kind, args = parts[0], [float(x) for x in parts[1:]]
    if kind == "power" and len(args) == 1:
        return Power(args[0])
    if kind == "logbump" and len(args) == 2:
        return LogBump(*args)
    if kind == "loglogbump" and len(args) == 2:
        return LogLogBump(*args)
    raise KeyError(f"unknown Young function id {spec!r}")


REGISTRY = ["power:1.5", "power:2", "power:3", "logbump:2:1", "logbump:3:0.5", "logbump:1.5:1",
            "loglogbump:2:1", "loglogbump:3:0.5"]


def young_eval(phi: YoungFunction, t):
    return phi(t)


def young_inverse(phi: YoungFunction, s):
    return phi.inverse(s)


def complementary(phi: YoungFunction) -> YoungFunction:
    return phi.complementary()


def check_young(phi: YoungFunction) -> dict:
    """Young-function axioms sampled on a geometric grid."""
    t = np.geomspace(1e-6, 1e6, 121)
    v = phi(t)
    small = float(phi(1e-6) / 1e-6)
    large = float(phi(1e6) / 1e6)
    mid = phi(np.sqrt(t[:-1] * t[1:]) * 0 + (t[:-1] + t[1:]) / 2)
    convex = bool(np.all(mid <= (v[:-1] + v[1:]) / 2 * (1 + 1e-10)))
    increasing = bool(np.all(np.diff(v) > 0))
    return {"ratio_small": small, "ratio_large": large, "limits_ok": small < 1e-2 and large > 1e2,
            "convex": convex, "increasing": increasing}


# ---------------------------------------------------------------------------
# Luxemburg norms


def _lux_bisect(avg_fn, lam_lo, lam_hi, rtol=1e-12, iters=200):
    """Vectorized bisection in log λ for the Luxemburg infimum."""
    lo, hi = np.log(lam_lo), np.log(lam_hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = avg_fn(np.exp(mid)) <= 1.0
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
        if np.all(hi - lo <= rtol):
            break
    return np.exp(hi)


def luxemburg_values(values: np.ndarray, masses: np.ndarray, phi: YoungFunction) -> float:
    """inf{λ > 0 : Σ m Φ(|v|/λ) / Σ m ≤ 1}."""
    a = np.abs(values)
    total = masses.sum()
    top = a.max() if a.size else 0.0
    if top == 0:
        return 0.0
    one = float(phi.inverse(1.0))
    lam_hi = top / one
    lam_lo = float(np.sum(a * masses) / total) / one
    if lam_hi <= lam_lo * (1 + 1e-15):
        return lam_hi
    avg = lambda lam: np.sum(masses * phi(a / lam)) / total
    return float(_lux_bisect(avg, lam_lo, lam_hi))


def luxemburg_norm(f: GridFunction, box, phi: YoungFunction) -> float:
    """‖f‖_{Φ,B} with respect to normalized Lebesgue measure on B."""
    v, w = distribution(f, box)
    if w.sum() <= 0:
        raise ValueError("box has zero measure")
    return luxemburg_values(v, w, phi)


def luxemburg_tiling(samples: np.ndarray, t: Tiling, phi: YoungFunction) -> np.ndarray:
    """Luxemburg norms of every cube of a tiling at once."""
    cube, cell, mass = t.segments()
    a = np.abs(samples).ravel()[cell]
    K = int(np.prod(t.shape))
    total = np.bincount(cube, mass, K)
    if isinstance(phi, Power):
        # closed form: c⟨|f|^p⟩ λ^{-p} = 1
        return ((phi.c * np.bincount(cube, a ** phi.p * mass, K) / total) ** (1 / phi.p)).reshape(t.shape)
    top = np.zeros(K)
    np.maximum.at(top, cube, a)
    one = float(phi.inverse(1.0))
    lam_hi = top / one
    lam_lo = np.bincount(cube, a * mass, K) / total / one
    zero = top == 0
    lam_lo = np.where(zero, 1.0, np.minimum(lam_lo, lam_hi))
    lam_hi = np.where(zero, 1.0, lam_hi)

    def avg(lam):
        return np.bincount(cube, mass * phi(a / lam[cube]), K) / total

    out = _lux_bisect(avg, lam_lo, lam_hi)
    return np.where(zero, 0.0, out).reshape(t.shape)


def orlicz_maximal(f: GridFunction, phi: YoungFunction, system: DyadicSystem | None = None) -> GridFunction:
    """M_Φ f: per cell, sup of ‖f‖_{Φ,Q} over enumerated cubes meeting the cell."""
    system = default_system(f.domain) if system is None else system
    out = np.zeros(f.domain.shape)
    for t in system.tilings():
        out = np.maximum(out, t.spread_max(luxemburg_tiling(f.samples, t, phi)))
    return GridFunction(f.domain, out)


# ---------------------------------------------------------------------------
# B_p constant


@dataclass
class BpResult:
    value: float
    divergent: bool
    regime: str
    slope: float

    @property
    def finite(self) -> bool:
        return not self.divergent


def bp_constant(phi: YoungFunction, p: float, eps: float = 0.02) -> BpResult:
    """[Φ]_{B_p} = ∫_1^∞ Φ(t) t^{-p-1} dt with tail extrapolation.

    With u = log t the integrand is g(u) = exp(log Φ(e^u) - p u). Its decay is
    probed in successively slower scales over the last two decades of the
    range: u (power decay), log u (log decay) and log log u (loglog decay).
    A scale in which the integrand decays like x^{-1-ε} certifies
    convergence and gives the tail; otherwise the integral is declared
    divergent.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    G = lambda u: phi.log_phi(np.asarray(u, dtype=float)) - p * np.asarray(u, dtype=float)
    U1, W2 = 40.0, math.log(1e8)
    dec = 2 * math.log(10)
    head = integrate.quad(lambda u: math.exp(float(G(u))), 0.0, U1, limit=200, epsabs=0, epsrel=1e-11)[0]
    H = lambda w: float(G(math.exp(w))) + w
    a1 = (H(W2) - H(W2 - dec)) / dec
    if a1 < -20.0:
        a0 = float(G(U1) - G(U1 - dec)) / dec
        if a0 >= 0:
            return BpResult(math.inf, True, "power", a0)
        return BpResult(head + math.exp(float(G(U1))) / -a0, False, "power", a0)
    K = lambda z: H(math.exp(z)) + z
    z2 = math.log(W2)
    a2 = K(z2) - K(z2 - 1.0)
    if a1 > eps or a2 > -eps:
        return BpResult(math.inf, True, "log" if a1 > eps else "loglog", a1 if a1 > eps else a2)
    mid = integrate.quad(lambda w: math.exp(H(w)), math.log(U1), W2, limit=400, epsabs=0, epsrel=1e-9)[0]
    # exponential decay in log u: tail from H; power decay in log u: tail from K
    if a2 < -3.0:
        return BpResult(head + mid + math.exp(H(W2)) / -a1, False, "log", a1)
    return BpResult(head + mid + math.exp(K(z2)) / -a2, False, "loglog", a2)
