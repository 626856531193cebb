"""Piecewise-constant functions on a truncated box [-L, L)^n.

Every function, weight and operator output in the package is a GridFunction:
one real sample per cell, interpreted as constant on that cell and zero
outside the domain. Box integrals are exact through partial-cell overlaps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

Box = Sequence[tuple[float, float]]

MAX_N = {1: 4096, 2: 256}


@dataclass(frozen=True)
class DomainSpec:
    """Cell grid on [-L, L)^n with N cells per axis."""

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if not self.L > 0:
            raise ValueError("half-extent L must be positive")
        if self.N < 1 or self.N & (self.N - 1):
            raise ValueError("N must be a power of two")
        if self.N > MAX_N[self.n]:
            raise ValueError(f"N={self.N} exceeds desk-scale limit for n={self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def cell_measure(self) -> float:
        return self.h ** self.n

    @property
    def measure(self) -> float:
        return (2.0 * self.L) ** self.n

    @property
    def box(self) -> tuple[tuple[float, float], ...]:
        return ((-self.L, self.L),) * self.n

    def edges(self) -> np.ndarray:
        """Cell edges along one axis (N + 1 values)."""
        return -self.L + self.h * np.arange(self.N + 1)

    def centers(self) -> np.ndarray:
        return -self.L + self.h * (np.arange(self.N) + 0.5)

    def center_grid(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates broadcast to the sample shape."""
        c = self.centers()
        if self.n == 1:
            return (c,)
        return tuple(np.meshgrid(c, c, indexing="ij"))

    def radius(self) -> np.ndarray:
        """Euclidean norm of each cell center."""
        return np.sqrt(sum(x * x for x in self.center_grid()))

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N}


class GridFunction:
    """Immutable piecewise-constant samples on a DomainSpec.

    Args:
        domain: the cell grid.
        samples: array of shape ``domain.shape`` (anything np.asarray accepts).
        weight: mark as a weight; samples must then be nonnegative.
    """

    __slots__ = ("domain", "samples", "weight")

    def __init__(self, domain: DomainSpec, samples, weight: bool = False):
        arr = np.array(samples, dtype=float).reshape(domain.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if weight and np.any(arr < 0):
            raise ValueError("weight samples must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "weight", bool(weight))

    def __setattr__(self, key, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self):
        return f"GridFunction(n={self.domain.n}, N={self.domain.N}, L={self.domain.L}, weight={self.weight})"

    @classmethod
    def constant(cls, domain: DomainSpec, c: float, weight: bool = False) -> "GridFunction":
        return cls(domain, np.full(domain.shape, float(c)), weight=weight)

    @classmethod
    def from_callable(cls, domain: DomainSpec, fn, weight: bool = False) -> "GridFunction":
        """Sample ``fn`` at cell centers (fn receives one array per axis)."""
        return cls(domain, fn(*domain.center_grid()), weight=weight)

    def with_samples(self, samples, weight: bool | None = None) -> "GridFunction":
        return GridFunction(self.domain, samples, self.weight if weight is None else weight)

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.domain != self.domain:
                raise ValueError("domain mismatch")
            return other.samples
        return other

    def __add__(self, other):
        return GridFunction(self.domain, self.samples + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.domain, self.samples - self._other(other))

    def __mul__(self, other):
        return GridFunction(self.domain, self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.domain, self.samples / self._other(other))

    def __neg__(self):
        return GridFunction(self.domain, -self.samples)

    def __abs__(self):
        return GridFunction(self.domain, np.abs(self.samples), self.weight)

    def __pow__(self, q: float):
        return GridFunction(self.domain, np.abs(self.samples) ** q, self.weight)

    def support(self) -> np.ndarray:
        return self.samples != 0

    def to_json(self) -> str:
        return json.dumps(
            {"domain": self.domain.to_dict(), "samples": self.samples.tolist(), "weight": self.weight}
        )

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        d = json.loads(text)
        dom = d["domain"]
        return cls(DomainSpec(int(dom["n"]), float(dom["L"]), int(dom["N"])), d["samples"], d.get("weight", False))


def axis_overlap(domain: DomainSpec, lo: float, hi: float) -> np.ndarray:
    """Length of [lo, hi) ∩ cell_i for every cell along one axis."""
    e = domain.edges()
    return np.clip(np.minimum(hi, e[1:]) - np.maximum(lo, e[:-1]), 0.0, None)


def box_weights(domain: DomainSpec, box: Box) -> np.ndarray:
    """Overlap measure |B ∩ cell| for every cell, shaped like the samples."""
    if len(box) != domain.n:
        raise ValueError("box dimension does not match domain")
    parts = [axis_overlap(domain, lo, hi) for lo, hi in box]
    if domain.n == 1:
        return parts[0]
    return np.outer(parts[0], parts[1])


def clip_box(domain: DomainSpec, box: Box) -> tuple[tuple[float, float], ...]:
    return tuple((max(lo, -domain.L), min(hi, domain.L)) for lo, hi in box)


def box_measure(domain: DomainSpec, box: Box) -> float:
    """Measure of B ∩ domain."""
    m = 1.0
    for lo, hi in clip_box(domain, box):
        m *= max(hi - lo, 0.0)
    return m


def integral(f: GridFunction) -> float:
    return float(np.sum(f.samples) * f.domain.cell_measure)


def box_integral(f: GridFunction, box: Box) -> float:
    return float(np.sum(f.samples * box_weights(f.domain, box)))


def box_average(f: GridFunction, box: Box) -> float:
    """Average of f over B ∩ domain, exact for piecewise-constant data."""
    wts = box_weights(f.domain, box)
    mass = wts.sum()
    if not mass > 0:
        raise ValueError("box has zero measure inside the domain")
    return float(np.sum(f.samples * wts) / mass)


def lp_norm(f: GridFunction, p: float, w: GridFunction | None = None) -> float:
    """(∫|f|^p w)^{1/p}; p = inf gives the essential sup (over the support of w if given)."""
    if not p > 0:
        raise ValueError("p must be positive")
    a = np.abs(f.samples)
    if np.isinf(p):
        if w is not None:
            a = a[w.samples > 0]
        return float(a.max()) if a.size else 0.0
    mass = f.domain.cell_measure if w is None else w.samples * f.domain.cell_measure
    return float(np.sum(a ** p * mass) ** (1.0 / p))


def level_masses(f: GridFunction, w: GridFunction | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Distinct positive magnitudes (descending) and w({|f| ≥ v}) for each."""
    a = np.abs(f.samples).ravel()
    mass = np.full(a.shape, f.domain.cell_measure) if w is None else w.samples.ravel() * f.domain.cell_measure
    keep = a > 0
    a, mass = a[keep], mass[keep]
    if a.size == 0:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(-a, kind="stable")
    a, mass = a[order], mass[order]
    cum = np.cumsum(mass)
    # last index of each run of equal values
    last = np.r_[np.nonzero(np.diff(a))[0], a.size - 1]
    return a[last], cum[last]


def weak_lp_norm(f: GridFunction, p: float, w: GridFunction | None = None) -> float:
    """sup_t t·w({|f| > t})^{1/p}.

    On piecewise-constant data the supremum is the limit t → v⁻ at a sample
    magnitude v, which equals v·w({|f| ≥ v})^{1/p}.
    """
    if not p > 0:
        raise ValueError("p must be positive")
    v, W = level_masses(f, w)
    if v.size == 0:
        return 0.0
    return float(np.max(v * W ** (1.0 / p)))


class PrefixIntegral:
    """Exact integrals of f over many boxes via interpolated cumulative sums.

    The cumulative integral of a piecewise-constant function is piecewise
    linear (1D) or piecewise bilinear (2D), so interpolation at arbitrary box
    corners is exact up to rounding.
    """

    def __init__(self, f: GridFunction | np.ndarray, domain: DomainSpec | None = None):
        if isinstance(f, GridFunction):
            domain, s = f.domain, f.samples
        else:
            s = np.asarray(f, dtype=float)
        self.domain = domain
        h = domain.h
        if domain.n == 1:
            self.table = np.r_[0.0, np.cumsum(s) * h]
        else:
            t = np.zeros((domain.N + 1, domain.N + 1))
            t[1:, 1:] = np.cumsum(np.cumsum(s, axis=0), axis=1) * h * h
            self.table = t
        self.edges = domain.edges()

    def _locate(self, x):
        d = self.domain
        u = (np.clip(x, -d.L, d.L) + d.L) / d.h
        i = np.clip(np.floor(u).astype(int), 0, d.N - 1)
        return i, u - i

    def cumulative(self, x, y=None):
        if self.domain.n == 1:
            i, fr = self._locate(np.asarray(x, dtype=float))
            return self.table[i] * (1 - fr) + self.table[i + 1] * fr
        i, a = self._locate(np.asarray(x, dtype=float))
        j, b = self._locate(np.asarray(y, dtype=float))
        t = self.table
        return (t[i, j] * (1 - a) * (1 - b) + t[i + 1, j] * a * (1 - b)
                + t[i, j + 1] * (1 - a) * b + t[i + 1, j + 1] * a * b)

    def integrate(self, lo, hi):
        """Integrals over boxes; lo, hi have shape (..., n) or (...,) in 1D."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.domain.n == 1:
            return self.cumulative(hi) - self.cumulative(lo)
        x0, y0 = lo[..., 0], lo[..., 1]
        x1, y1 = hi[..., 0], hi[..., 1]
        c = self.cumulative
        return c(x1, y1) - c(x0, y1) - c(x1, y0) + c(x0, y0)
