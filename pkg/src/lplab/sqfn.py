"""Multilinear Littlewood–Paley operators on the cell grid.

The kernel is factorized, ψ(x, y⃗) = ψ₀(x − y₁) ∏_{j≥2} φ(x − y_j), with
polynomial profiles built from B(z) = (1 − z²)^4 on [−1, 1]: ψ₀ uses B''
(exactly mean zero) and φ uses B. Cell integrals of the profiles are exact
through antiderivatives, so ψ_t(f⃗) on piecewise-constant data carries no
quadrature error in y⃗.

Cone operators share one energy field E_k(y) = |ψ_{t_k}(f⃗)(y)|² on geometric
t-nodes; S_α, S̃_α and g*_λ differ only in the node weights, which makes the
chain inequalities hold node by node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.signal import fftconvolve

from .dyadic import (DyadicSystem, SparseFamily, cube_sup, default_levels, default_system,
                     oscillation_maximal, sharp_maximal, top_cube)
from .gridfn import DomainSpec, GridFunction, PrefixIntegral

# ---------------------------------------------------------------------------
# kernel

_B = Polynomial([1.0, 0.0, -1.0]) ** 4


def _poly_sup(p: Polynomial) -> float:
    """max |p| on [-1, 1], from endpoints and critical points."""
    crit = p.deriv().roots()
    crit = crit[np.abs(crit.imag) < 1e-12].real
    pts = np.r_[-1.0, 1.0, crit[(crit >= -1) & (crit <= 1)]]
    return float(np.max(np.abs(p(pts))))


class Profile1D:
    """Polynomial profile on [-1, 1], zero outside, with exact antiderivative."""

    def __init__(self, poly: Polynomial, jump: float = 0.0):
        self.poly = poly
        self.jump = jump  # adds jump·sign(z)·B(z); used only for negative tests
        anti = poly.integ()
        self.anti = anti - anti(-1.0)
        self.total = float(self.anti(1.0))

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        inside = np.abs(z) <= 1
        v = self.poly(np.clip(z, -1, 1))
        if self.jump:
            v = v + self.jump * np.sign(z) * _B(np.clip(z, -1, 1))
        return np.where(inside, v, 0.0)

    def antiderivative(self, z):
        z = np.clip(np.asarray(z, dtype=float), -1.0, 1.0)
        return self.anti(z)

    def sup(self) -> float:
        return _poly_sup(self.poly) + abs(self.jump) * _poly_sup(_B)

    def lip(self) -> float:
        return _poly_sup(self.poly.deriv()) + abs(self.jump) * _poly_sup(_B.deriv())


@dataclass
class MultilinearKernel:
    """ψ(x, y⃗) = scale · ψ₀(x − y₁) ∏_{j≥2} φ(x − y_j) on R^n.

    n-dimensional profiles are tensor products of 1D profiles evaluated at
    √n·z, so every factor is supported in the unit ball.
    """

    m: int = 2
    n: int = 1
    cancel: bool = True
    scale: float = 1.0
    jump: float = 0.0
    zero: bool = False
    id: str = ""
    delta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n not in (1, 2):
            raise ValueError("need m ≥ 1 and n ∈ {1, 2}")
        self.s = math.sqrt(self.n)
        lead = Profile1D(_B.deriv(2) if self.cancel else _B, self.jump)
        bump = Profile1D(_B)
        # per-axis profiles of ψ₀ and φ
        self.psi0_axes = [lead] + [bump] * (self.n - 1)
        self.phi_axes = [bump] * self.n
        if not self.id:
            self.id = f"{'cancel' if self.cancel else 'nocancel'}:{self.m}:{self.n}"
        amp = 0.0 if self.zero else self.scale
        self.amp = amp
        self.A = self._certified_A()

    # pointwise evaluation ---------------------------------------------------
    def _factor(self, axes, z):
        z = np.asarray(z, dtype=float)
        out = np.ones(z.shape[:-1])
        for a, prof in enumerate(axes):
            out = out * prof(self.s * z[..., a])
        return out

    def psi0(self, z):
        return self._factor(self.psi0_axes, z)

    def phi(self, z):
        return self._factor(self.phi_axes, z)

    def __call__(self, x, ys):
        """ψ(x, y⃗); x has shape (..., n), ys shape (..., m, n)."""
        x = np.asarray(x, dtype=float)
        ys = np.asarray(ys, dtype=float)
        out = self.amp * self.psi0(x - ys[..., 0, :])
        for j in range(1, self.m):
            out = out * self.phi(x - ys[..., j, :])
        return out

    # certified constants ---------------------------------------------------
    def _grad_bound(self, axes) -> float:
        parts = []
        for a in range(self.n):
            v = self.s * axes[a].lip()
            for b in range(self.n):
                if b != a:
                    v *= axes[b].sup()
            parts.append(v)
        return math.sqrt(sum(p * p for p in parts))

    def sup_psi0(self) -> float:
        return float(np.prod([p.sup() for p in self.psi0_axes]))

    def sup_phi(self) -> float:
        return float(np.prod([p.sup() for p in self.phi_axes]))

    def _certified_A(self) -> float:
        """Size/smoothness constant from the compact support and Lipschitz bounds.

        ψ vanishes unless every |x − y_i| ≤ 1, so 1 + Σ|x − y_i| ≤ 1 + m on the
        support; a difference allowed by the smoothness condition can only be
        nonzero when 1 + Σ|x − y_i| < 1 + 2m.
        """
        if self.amp == 0:
            return 0.0
        m, n, d, g = self.m, self.n, self.delta, self.gamma
        s0, s1 = self.sup_psi0(), self.sup_phi()
        sup = self.amp * s0 * s1 ** (m - 1)
        g0, g1 = self._grad_bound(self.psi0_axes), self._grad_bound(self.phi_axes)
        lip_x = self.amp * (g0 * s1 ** (m - 1) + (m - 1) * s0 * g1 * s1 ** max(m - 2, 0))
        lip_y = self.amp * max(g0 * s1 ** (m - 1), s0 * g1 * s1 ** max(m - 2, 0))
        size = sup * (1 + m) ** (m * n + d)
        # |Δψ| ≤ min(2 sup, lip |h|) ≤ (2 sup)^{1-γ} lip^γ |h|^γ
        lip = max(lip_x, lip_y)
        smooth = (2 * sup) ** (1 - g) * lip ** g * (1 + 2 * m) ** (m * n + d + g)
        return float(max(size, smooth))

    # convolution factors ------------------------------------------------------
    def _axis_taps(self, prof: Profile1D, h: float, t: float) -> tuple[np.ndarray, int]:
        """G(d) = (1/t)∫_{cell d} k((y−z)/t) dz for cell offsets d = −R..R."""
        R = int(math.ceil(t / (self.s * h))) + 1
        d = np.arange(-R, R + 1)
        u1 = self.s * (d + 0.5) * h / t
        u0 = self.s * (d - 0.5) * h / t
        return (prof.antiderivative(u1) - prof.antiderivative(u0)) / self.s, R

    def factor_apply(self, axes, f: np.ndarray, h: float, t: float) -> np.ndarray:
        """Cellwise t^{-n}∫ k((y − z)/t) f(z) dz at cell centers y."""
        out = np.asarray(f, dtype=float)
        N = out.shape[0]
        for a, prof in enumerate(axes):
            taps, R = self._axis_taps(prof, h, t)
            out = np.moveaxis(out, a, -1)
            if R >= N:
                keep = slice(R - (N - 1), R + N)
                taps, R = taps[keep], N - 1
            if taps.size * N > 200_000:
                full = fftconvolve(out, taps.reshape((1,) * (out.ndim - 1) + (-1,)), axes=-1)
            else:
                full = np.apply_along_axis(lambda v: np.convolve(v, taps), -1, out)
            out = np.moveaxis(full[..., R:R + N], -1, a)
        return out

    def apply(self, fs: Sequence[np.ndarray], h: float, t: float) -> np.ndarray:
        if len(fs) != self.m:
            raise ValueError(f"kernel is {self.m}-linear")
        if self.amp == 0:
            return np.zeros(np.shape(fs[0]))
        out = self.amp * self.factor_apply(self.psi0_axes, fs[0], h, t)
        for f in fs[1:]:
            out = out * self.factor_apply(self.phi_axes, f, h, t)
        return out


def kernel_from_id(spec: str, scale: float = 1.0) -> MultilinearKernel:
    """Registry: "cancel:m:n", "nocancel:m:n", "jump:m:n", "zero:m:n"."""
    kind, m, n = spec.split(":")
    m, n = int(m), int(n)
    if kind == "cancel":
        return MultilinearKernel(m, n, True, scale)
    if kind == "nocancel":
        return MultilinearKernel(m, n, False, scale)
    if kind == "jump":
        return MultilinearKernel(m, n, True, scale, jump=0.3, id=spec)
    if kind == "zero":
        return MultilinearKernel(m, n, True, scale, zero=True, id=spec)
    raise KeyError(f"unknown kernel id {spec!r}")


@dataclass
class KernelReport:
    A_obs: float
    A_certified: float
    size_ratio: float
    smooth_ratio: float
    delta_ok: bool
    gamma_ok: bool
    blowup: float

    @property
    def passed(self) -> bool:
        return self.delta_ok and self.gamma_ok


def kernel_validate(kernel: MultilinearKernel, samples: int = 4000, seed: int = 0) -> KernelReport:
    """Worst sampled size and smoothness ratios against the certified A.

    Smoothness pairs are drawn at shrinking separations; a ratio that grows
    by more than ×10 from separation 1e-2 to 1e-6 flags a discontinuity.
    """
    rng = np.random.default_rng(seed)
    m, n = kernel.m, kernel.n
    d, g = kernel.delta, kernel.gamma
    x = rng.uniform(-0.5, 0.5, size=(samples, n))
    ys = x[:, None, :] + rng.uniform(-1.0, 1.0, size=(samples, m, n)) / math.sqrt(n)
    size_ratio = 0.0
    worst_by_scale = []
    k = samples // 4
    for eps in (1e-2, 1e-4, 1e-6):
        # a share of points straddling the locus x = y₁ at the current scale
        ys[:k, 0, :] = x[:k] + rng.uniform(-eps, eps, size=(k, n))
        dist = np.linalg.norm(x[:, None, :] - ys, axis=-1)
        base = 1 + dist.sum(-1)
        val = kernel(x, ys)
        size_ratio = max(size_ratio, float(np.max(np.abs(val) * base ** (m * n + d))))
        dirs = rng.normal(size=(samples, n))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        step = eps * np.minimum(1.0, 0.5 * dist.max(-1)) * 10
        x2 = x + dirs * step[:, None] * 0.999
        rx = np.abs(kernel(x2, ys) - val) * base ** (m * n + d + g) / step ** g
        worst = float(np.max(rx))
        for i in range(m):
            ys2 = ys.copy()
            ys2[:, i, :] = ys[:, i, :] + dirs * step[:, None] * 0.999
            ry = np.abs(kernel(x, ys2) - val) * base ** (m * n + d + g) / step ** g
            worst = max(worst, float(np.max(ry)))
        worst_by_scale.append(worst)
    smooth_ratio = max(worst_by_scale)
    blowup = worst_by_scale[-1] / worst_by_scale[0] if worst_by_scale[0] > 0 else 1.0
    A = kernel.A
    tol = 1 + 1e-9
    return KernelReport(max(size_ratio, smooth_ratio), A, size_ratio, smooth_ratio,
                        size_ratio <= A * tol, smooth_ratio <= A * tol and blowup < 10.0, blowup)


# ---------------------------------------------------------------------------
# quadrature and energy field


@dataclass(frozen=True)
class ConeQuadrature:
    """Midpoint rule in log t with T geometric nodes on [t_min, t_max]."""

    t_min: float
    t_max: float
    T: int = 64

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max or self.T < 1:
            raise ValueError("need 0 < t_min < t_max and T ≥ 1")

    @classmethod
    def default(cls, domain: DomainSpec, T: int = 64) -> "ConeQuadrature":
        return cls(domain.h, 4 * domain.L, T)

    @property
    def dlog(self) -> float:
        return math.log(self.t_max / self.t_min) / self.T

    def nodes(self) -> np.ndarray:
        return self.t_min * np.exp(self.dlog * (np.arange(self.T) + 0.5))

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "T": self.T}


class EnergyField:
    """E_k(y) = |ψ_{t_k}(f⃗)(y)|² at cell centers, with node weights c_k = h^n Δlog t / t_k^n."""

    def __init__(self, kernel: MultilinearKernel, fs: Sequence[GridFunction], quad: ConeQuadrature):
        dom = fs[0].domain
        if any(f.domain != dom for f in fs):
            raise ValueError("domain mismatch")
        if kernel.n != dom.n:
            raise ValueError("kernel dimension does not match domain")
        self.kernel, self.quad, self.domain = kernel, quad, dom
        self.fs = [f.samples for f in fs]
        self.t = quad.nodes()
        h, n = dom.h, dom.n
        self.values = np.stack([kernel.apply(self.fs, h, t) for t in self.t])
        self.E = self.values ** 2
        self.c = h ** n * quad.dlog / self.t ** n
        self._dist = None

    @property
    def shape(self):
        return self.domain.shape

    def distances(self) -> np.ndarray:
        """|x_c − y_c| between all cell-center pairs (dense path only)."""
        if self._dist is None:
            pts = np.stack([g.ravel() for g in self.domain.center_grid()], -1)
            diff = pts[:, None, :] - pts[None, :, :]
            self._dist = np.sqrt(np.sum(diff * diff, -1))
        return self._dist

    def tail_bound(self) -> float:
        """Energy bound for y outside the domain box.

        Outside the box only input cells within distance t of the boundary
        matter, so each factor is bounded by min(‖k_j‖_1 sup_{band_t}|f_j|,
        sup k_j ‖f_j‖_1 / t^n) with ‖k‖_1 ≤ sup k · (2/√n)^n; the affected y
        lie in a shell of width t.
        """
        k, dom = self.kernel, self.domain
        m, n, L = k.m, dom.n, dom.L
        vol = (2 / math.sqrt(n)) ** n
        sups = [k.sup_psi0()] + [k.sup_phi()] * (m - 1)
        norms = [np.sum(np.abs(f)) * dom.cell_measure for f in self.fs]
        dist = np.min([L - np.abs(c) for c in dom.center_grid()], axis=0) - dom.h / 2
        total = 0.0
        for t in self.t:
            band = dist <= t
            B = k.amp * np.prod([min(sk * vol * np.max(np.abs(f[band])), sk * nf / t ** n)
                                 for sk, nf, f in zip(sups, norms, self.fs)])
            shell = (2 * L + 2 * t) ** n - (2 * L) ** n
            total += self.quad.dlog / t ** n * shell * B * B
        return float(math.sqrt(total))

    def small_scale_estimate(self) -> float:
        """Uncertified estimate of the t < t_min contribution: one more octave of the first node."""
        first = np.max(self.E[0]) * self.domain.cell_measure * math.log(2) / self.t[0] ** self.domain.n
        return float(math.sqrt(first))

    def cone_sum(self, weight, nodes: np.ndarray | None = None) -> np.ndarray:
        """Σ_k c_k Σ_y W(|x − y|, t_k) E_k(y) at every cell x (squared operator)."""
        idx = range(len(self.t)) if nodes is None else nodes
        N, n = self.domain.N, self.domain.n
        cells = N ** n
        acc = np.zeros(cells)
        if cells <= 1024:
            D = self.distances()
            for k in idx:
                acc += self.c[k] * (weight(D, self.t[k]) @ self.E[k].ravel())
        else:
            off = np.arange(-(N - 1), N) * self.domain.h
            if n == 1:
                D = np.abs(off)
            else:
                D = np.sqrt(off[:, None] ** 2 + off[None, :] ** 2)
            for k in idx:
                full = fftconvolve(self.E[k], weight(D, self.t[k]))
                sl = tuple(slice(N - 1, 2 * N - 1) for _ in range(n))
                acc += self.c[k] * np.maximum(full[sl], 0.0).ravel()
        return acc.reshape(self.domain.shape)


def energy_field(kernel: MultilinearKernel, fs: Sequence[GridFunction], quad: ConeQuadrature | None = None):
    return EnergyField(kernel, fs, quad or ConeQuadrature.default(fs[0].domain))


def psi_t_apply(kernel: MultilinearKernel, fs: Sequence[GridFunction], t: float) -> GridFunction:
    """ψ_t(f⃗) at cell centers."""
    if not t > 0:
        raise ValueError("t must be positive")
    dom = fs[0].domain
    return GridFunction(dom, kernel.apply([f.samples for f in fs], dom.h, t))


def psi_t_direct(kernel: MultilinearKernel, fs: Sequence[GridFunction], t: float, order: int = 8) -> np.ndarray:
    """Independent evaluation of ψ_t(f⃗) at cell centers (n = 1).

    Each factor integral is split at the support endpoints y ± t and summed
    cell by cell with Gauss–Legendre, exact for the polynomial profiles.
    """
    dom = fs[0].domain
    if dom.n != 1:
        raise NotImplementedError("direct oracle is one-dimensional")
    g, w = np.polynomial.legendre.leggauss(order)
    e = dom.edges()
    out = np.zeros(dom.N)
    for i, yi in enumerate(dom.centers()):
        prod = kernel.amp
        for j, f in enumerate(fs):
            prof = kernel.psi0 if j == 0 else kernel.phi
            total = 0.0
            for c in range(dom.N):
                a, b = max(e[c], yi - t), min(e[c + 1], yi + t)
                if b <= a or f.samples[c] == 0:
                    continue
                z = 0.5 * (a + b) + 0.5 * (b - a) * g
                total += f.samples[c] * 0.5 * (b - a) * np.sum(w * prof(((yi - z) / t)[:, None]))
            prod *= total / t
        out[i] = prod
    return out


# ---------------------------------------------------------------------------
# cone operators


def _field(fs_or_field, kernel=None, quad=None) -> EnergyField:
    if isinstance(fs_or_field, EnergyField):
        return fs_or_field
    if kernel is None:
        raise ValueError("kernel required when passing functions")
    return energy_field(kernel, fs_or_field, quad)


def _wrap(field: EnergyField, sq: np.ndarray) -> GridFunction:
    return GridFunction(field.domain, np.sqrt(np.maximum(sq, 0.0)))


def cone_indicator(alpha: float):
    return lambda D, t: (D < alpha * t).astype(float)


def s_alpha(fs, alpha: float, quad: ConeQuadrature | None = None, kernel: MultilinearKernel | None = None,
            nodes=None) -> GridFunction:
    """S_α(f⃗) with cone membership by cell-center distance."""
    if not alpha > 0:
        raise ValueError("aperture must be positive")
    f = _field(fs, kernel, quad)
    return _wrap(f, f.cone_sum(cone_indicator(alpha), nodes))


def g_star_weight(lam: float, n: int):
    return lambda D, t: (t / (t + D)) ** (n * lam)


def g_star(fs, lam: float, quad: ConeQuadrature | None = None, kernel: MultilinearKernel | None = None,
           nodes=None) -> GridFunction:
    """g*_λ(f⃗) with y truncated to the domain (see EnergyField.tail_bound)."""
    if not lam > 0:
        raise ValueError("λ must be positive")
    f = _field(fs, kernel, quad)
    return _wrap(f, f.cone_sum(g_star_weight(lam, f.domain.n), nodes))


def _smoothstep(u):
    """C^∞ step: 0 for u ≤ 0, 1 for u ≥ 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    """Radial Φ with 1_{B(0,1)} ≤ Φ ≤ 1_{B(0,2)}; kind "smooth" or the degenerate "upper" = 1_{B(0,2)}."""

    kind: str = "smooth"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "upper":
            return (r < 2).astype(float)
        if self.kind == "smooth":
            return np.where(r < 2, _smoothstep(2.0 - r), 0.0)
        raise ValueError(f"unknown profile {self.kind!r}")


def s_tilde(fs, alpha: float, profile: BumpProfile = BumpProfile(), quad: ConeQuadrature | None = None,
            kernel: MultilinearKernel | None = None, nodes=None) -> GridFunction:
    """S̃_α(f⃗) with the smooth cutoff Φ((x − y)/(αt))."""
    f = _field(fs, kernel, quad)
    return _wrap(f, f.cone_sum(lambda D, t: profile(D / (alpha * t)), nodes))


@dataclass
class GssBound:
    g: GridFunction
    bound: np.ndarray
    remainder: np.ndarray
    K: int


def gss_bound(fs, lam: float, K: int = 20, quad: ConeQuadrature | None = None,
              kernel: MultilinearKernel | None = None) -> GssBound:
    """g*_λ and S₁ + Σ_{k≤K} 2^{−kλn/2} S_{2^{k+1}} + R, R from nodes with |x − y| ≥ 2^{K+1} t."""
    f = _field(fs, kernel, quad)
    n = f.domain.n
    g = g_star(f, lam)
    total = s_alpha(f, 1.0).samples.copy()
    for k in range(K + 1):
        total += 2.0 ** (-k * lam * n / 2) * s_alpha(f, 2.0 ** (k + 1)).samples
    w = g_star_weight(lam, n)
    rem = np.sqrt(np.maximum(f.cone_sum(lambda D, t: w(D, t) * (D >= 2.0 ** (K + 1) * t)), 0.0))
    return GssBound(g, total + rem, rem, K)


# ---------------------------------------------------------------------------
# maximal and sparse operators


def maximal(fs: Sequence[GridFunction], exponents: Sequence[float] | None = None, skip: int | None = None,
            system: DyadicSystem | None = None) -> GridFunction:
    """Per cell, sup over enumerated cubes meeting it of ∏_{i≠skip} ⟨|f_i|⟩_Q^{e_i}.

    ``skip`` is a 0-based slot index or None.
    """
    dom = fs[0].domain
    system = default_system(dom) if system is None else system
    exps = [1.0] * len(fs) if exponents is None else list(exponents)
    if any(e < 0 for e in exps):
        raise ValueError("exponents must be nonnegative")
    pres = [(PrefixIntegral(np.abs(f.samples), dom), e) for i, (f, e) in enumerate(zip(fs, exps)) if i != skip]

    def per(t):
        val = np.ones(t.shape)
        for pre, e in pres:
            val = val * np.maximum(t.averages(pre), 0.0) ** e
        return val

    return GridFunction(dom, cube_sup(system, per))


def sparse_operator(family: SparseFamily, r: float, fs: Sequence[GridFunction]) -> GridFunction:
    """A_S^r(f⃗) = (Σ_{Q∈S} ∏⟨|f_i|⟩_Q^r 1_Q)^{1/r}, with 1_Q tested at cell centers."""
    if r < 1:
        raise ValueError("r must be ≥ 1")
    dom = fs[0].domain
    pres = [PrefixIntegral(np.abs(f.samples), dom) for f in fs]
    xs = dom.center_grid()
    acc = np.zeros(dom.shape)
    for Q in family.cubes:
        lo = np.array([b[0] for b in Q.box])
        hi = np.array([b[1] for b in Q.box])
        prod = 1.0
        for pre in pres:
            val = pre.integrate(lo[0], hi[0]) if dom.n == 1 else pre.integrate(lo, hi)
            prod *= max(float(val), 0.0) / Q.measure
        acc = acc + family.coefficient(Q) * prod ** r * Q.contains_points(*xs)
    return GridFunction(dom, acc ** (1.0 / r))


def stopping_family(fs: Sequence[GridFunction], C: float | None = None) -> SparseFamily:
    """Stopping cubes of ∏⟨|f_i|⟩ from the top cube.

    The children of a stopping cube Q are the maximal dyadic P ⊊ Q with
    ∏⟨|f_i|⟩_P > C ∏⟨|f_i|⟩_Q. Each such P has ⟨|f_i|⟩_P > C^{1/m}⟨|f_i|⟩_Q
    for some i, so with the default C = (2m)^m the children fill at most
    half of Q.
    """
    dom = fs[0].domain
    m = len(fs)
    C = float((2 * m) ** m) if C is None else float(C)
    pres = [PrefixIntegral(np.abs(f.samples), dom) for f in fs]
    k_max = default_levels(dom)[1]

    def value(Q):
        lo = np.array([b[0] for b in Q.box])
        hi = np.array([b[1] for b in Q.box])
        v = 1.0
        for pre in pres:
            val = pre.integrate(lo[0], hi[0]) if dom.n == 1 else pre.integrate(lo, hi)
            v *= max(float(val), 0.0) / Q.measure
        return v

    Q0 = top_cube(dom)
    cubes, stack = [], [(Q0, value(Q0))]
    while stack:
        Q, vQ = stack.pop()
        cubes.append(Q)
        if vQ <= 0:
            continue
        frontier = Q.children() if Q.level < k_max else []
        while frontier:
            nxt = []
            for P in frontier:
                vP = value(P)
                if vP > C * vQ:
                    stack.append((P, vP))
                elif P.level < k_max and vP > 0:
                    nxt.extend(P.children())
            frontier = nxt
    return SparseFamily(dom, Q0.shift, cubes, 0.5)


def oscillation_ratio(fs, alpha: float, gamma: float, kernel: MultilinearKernel | None = None,
                  quad: ConeQuadrature | None = None, profile: BumpProfile = BumpProfile(),
                  system: DyadicSystem | None = None, form: str = "oscillation") -> float:
    """max over cells of L(S̃_α(f⃗)²) / (α^{2mn} M(f⃗)²).

    ``form="oscillation"`` takes L = sup_Q inf_c (⨍_Q|F - c|^γ)^{1/γ}, the
    quantity bounded cube by cube; ``form="sharp"`` takes L = M^♯_γ, which
    the former dominates.
    """
    f = _field(fs, kernel, quad)
    st = s_tilde(f, alpha, profile)
    if form == "oscillation":
        lhs = oscillation_maximal(st ** 2, gamma, system).samples
    elif form == "sharp":
        lhs = sharp_maximal(st ** 2, gamma, system).samples
    else:
        raise ValueError(f"unknown form {form!r}")
    M = maximal([GridFunction(f.domain, s) for s in f.fs], system=system).samples
    m, n = f.kernel.m, f.domain.n
    ok = M > 0
    return float(np.max(lhs[ok] / (alpha ** (2 * m * n) * M[ok] ** 2))) if ok.any() else 0.0
