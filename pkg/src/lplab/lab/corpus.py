"""Seeded input corpus: windowed trigonometric polynomials and weights."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gridfn import DomainSpec, GridFunction
from ..weights import generate_weight


def case_generators(seed: int, count: int) -> list[np.random.Generator]:
    """Independent PCG64 streams, one per case, split from a single seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def window(domain: DomainSpec, center, radius: float) -> np.ndarray:
    """(1 − |x − c|²/r²)² on the cube of half-side r around c, zero outside."""
    xs = domain.center_grid()
    out = np.ones(domain.shape)
    for x, c in zip(xs, np.atleast_1d(center)):
        u = (x - c) / radius
        out = out * np.where(np.abs(u) < 1, (1 - u * u) ** 2, 0.0)
    return out


def trig_poly(domain: DomainSpec, rng: np.random.Generator, center, radius: float, degree: int = 6,
              positive: bool = False) -> GridFunction:
    """Random trigonometric polynomial of the given degree, windowed to the cube.

    Coefficients decay like 1/(1+k); ``positive`` adds a constant offset so
    the polynomial stays nonnegative before windowing.
    """
    xs = domain.center_grid()
    c = np.atleast_1d(np.asarray(center, dtype=float))
    val = np.zeros(domain.shape)
    ks = np.arange(degree + 1)
    amp = rng.normal(size=(domain.n, degree + 1, 2)) / (1.0 + ks)[None, :, None]
    for a in range(domain.n):
        ph = np.pi * (xs[a] - c[a]) / radius
        for k in ks:
            val = val + amp[a, k, 0] * np.cos(k * ph) + amp[a, k, 1] * np.sin(k * ph)
    if positive:
        val = val - val.min() + 0.1 * (np.abs(val).max() + 1e-12)
    return GridFunction(domain, val * window(domain, c, radius))


@dataclass
class Case:
    index: int
    functions: list[GridFunction]
    weights: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def generate_corpus(manifest: dict, seed: int, domain: DomainSpec) -> list[Case]:
    """Build ``manifest["count"]`` cases, each with ``m`` windowed functions and weights.

    Manifest keys: count, m, degree, radius (window half-side; default L/2),
    center_jitter (fraction of the free room used to move the window),
    positive, and weights: {name: {kind, params}} where params may use
    "case" to take the per-case seed and ranges [lo, hi] for seeded draws.
    """
    count = int(manifest.get("count", 20))
    m = int(manifest.get("m", 2))
    degree = int(manifest.get("degree", 6))
    radius = float(manifest.get("radius", domain.L / 2))
    jitter = float(manifest.get("center_jitter", 0.5))
    positive = bool(manifest.get("positive", False))
    wspec = manifest.get("weights", {})
    out = []
    for i, rng in enumerate(case_generators(seed, count)):
        room = max(domain.L - radius, 0.0) * jitter
        center = rng.uniform(-room, room, size=domain.n)
        fs = [trig_poly(domain, rng, center, radius, degree, positive) for _ in range(m)]
        case_seed = int(rng.integers(0, 2**63 - 1))
        weights = {}
        for name, spec in wspec.items():
            params = {}
            for k, v in spec.get("params", {}).items():
                if v == "case":
                    params[k] = case_seed + len(weights)
                elif isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
                    params[k] = float(rng.uniform(v[0], v[1]))
                else:
                    params[k] = v
            weights[name] = generate_weight(spec["kind"], domain, **params)
        out.append(Case(i, fs, weights, {"center": center.tolist(), "radius": radius, "seed": case_seed}))
    return out


def random_sparse_family(domain: DomainSpec, rng: np.random.Generator, max_drop: int = 3, eta: float = 0.5):
    """Seeded nested family on the top cube's grid with |E_Q| ≥ η|Q| for every Q.

    Each selected cube picks descendants 1..max_drop levels down, in random
    order, while their total measure stays ≤ (1 − η)|Q|.
    """
    from ..dyadic import SparseFamily, default_levels, top_cube, verify_sparse

    k_max = default_levels(domain)[1]
    Q0 = top_cube(domain)
    cubes, stack = [], [Q0]
    while stack:
        Q = stack.pop()
        cubes.append(Q)
        if Q.level >= k_max:
            continue
        drop = int(rng.integers(1, max_drop + 1))
        level = min(Q.level + drop, k_max)
        desc = [Q]
        while desc[0].level < level:
            desc = [c for d in desc for c in d.children()]
        budget = (1 - eta) * Q.measure
        used = 0.0
        for i in rng.permutation(len(desc)):
            c = desc[i]
            if used + c.measure <= budget * (1 + 1e-12) and rng.random() < 0.8:
                used += c.measure
                stack.append(c)
    fam = SparseFamily(domain, Q0.shift, cubes, eta)
    if not verify_sparse(fam).passed:
        raise AssertionError("generated family is not sparse")
    return fam
