"""Shifted dyadic grids, sparse families and median-based dyadic tools.

Grids are D^j = {2^{-k}([0,1)^n + l + (-1)^k j/3)}, j ∈ {0,1,2}^n, clipped to
the domain box. Every "sup over cubes" functional in the package runs over the
cubes of all 3^n grids in a level window, so the values are certified lower
bounds of the continuous suprema.

Maximal-type outputs use the essential-sup convention on cells: the value on a
cell is the sup over enumerated cubes meeting that cell in positive measure,
i.e. the sup over the cell of the pointwise dyadic maximal function.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .gridfn import DomainSpec, GridFunction, PrefixIntegral

# relative tolerance used for strict measure comparisons
MEASURE_RTOL = 1e-12


class SelfVerificationFailed(RuntimeError):
    """The decomposition did not satisfy its pointwise bound."""


def _offset(shift: int, level: int) -> float:
    return (-1) ** (level % 2) * shift / 3.0


@dataclass(frozen=True)
class DyadicCube:
    """Cube 2^{-k}([0,1)^n + l + (-1)^k j/3) of grid j, clipped to the domain."""

    domain: DomainSpec = field(compare=False, repr=False)
    shift: tuple[int, ...]
    level: int
    position: tuple[int, ...]

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def raw_box(self) -> tuple[tuple[float, float], ...]:
        s = self.side
        return tuple(
            (s * (l + _offset(j, self.level)), s * (l + 1 + _offset(j, self.level)))
            for j, l in zip(self.shift, self.position)
        )

    @cached_property
    def box(self) -> tuple[tuple[float, float], ...]:
        L = self.domain.L
        return tuple((max(lo, -L), min(hi, L)) for lo, hi in self.raw_box)

    @property
    def measure(self) -> float:
        m = 1.0
        for lo, hi in self.box:
            m *= max(hi - lo, 0.0)
        return m

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.level, self.position)

    def children(self) -> list["DyadicCube"]:
        k = self.level
        base = [2 * l + (-1) ** (k % 2) * j for j, l in zip(self.shift, self.position)]
        out = []
        for bits in itertools.product((0, 1), repeat=len(base)):
            pos = tuple(b + e for b, e in zip(base, bits))
            c = DyadicCube(self.domain, self.shift, k + 1, pos)
            if c.measure > 0:
                out.append(c)
        return out

    def parent(self) -> "DyadicCube":
        k = self.level
        pos = tuple((l - (-1) ** ((k - 1) % 2) * j) // 2 for j, l in zip(self.shift, self.position))
        return DyadicCube(self.domain, self.shift, k - 1, pos)

    def contains_cube(self, other: "DyadicCube") -> bool:
        """Dyadic containment (same grid, other at the same or a finer level)."""
        if other.shift != self.shift or other.level < self.level:
            return False
        c = other
        while c.level > self.level:
            c = c.parent()
        return c.position == self.position

    def contains_points(self, *coords) -> np.ndarray:
        inside = None
        for (lo, hi), x in zip(self.box, coords):
            t = (x >= lo) & (x < hi)
            inside = t if inside is None else inside & t
        return inside

    def to_dict(self) -> dict:
        return {"grid_shift": list(self.shift), "level": self.level, "position": list(self.position)}


def cube_containing(domain: DomainSpec, shift: Sequence[int], level: int, point: Sequence[float]) -> DyadicCube:
    s = 2.0 ** (-level)
    pos = tuple(int(math.floor(x / s - _offset(j, level))) for j, x in zip(shift, point))
    return DyadicCube(domain, tuple(shift), level, pos)


def _covers(L: float, level: int) -> bool:
    """Some shift j has a single level-k interval covering [-L, L)."""
    s = 2.0 ** (-level)
    for j in range(3):
        o = _offset(j, level)
        if math.floor(-L / s - o) == math.ceil(L / s - o) - 1:
            return True
    return False


def default_levels(domain: DomainSpec) -> tuple[int, int]:
    """Coarsest level at which some shifted grid has a cube covering the domain
    (the "top cube"), and finest level whose side is ≥ h."""
    k_min = -math.ceil(math.log2(2 * domain.L) - 1e-12)
    while not _covers(domain.L, k_min):
        k_min -= 1
    k_max = math.floor(-math.log2(domain.h) + 1e-12)
    return k_min, k_max


def top_cube(domain: DomainSpec) -> "DyadicCube":
    """A cube of the default window whose clipped box is the whole domain."""
    k = default_levels(domain)[0]
    s = 2.0 ** (-k)
    shift, pos = [], []
    for _ in range(domain.n):
        for j in range(3):
            o = _offset(j, k)
            first = math.floor(-domain.L / s - o)
            if first == math.ceil(domain.L / s - o) - 1:
                shift.append(j)
                pos.append(first)
                break
    return DyadicCube(domain, tuple(shift), k, tuple(pos))


class Tiling:
    """All cubes of one grid at one level, as a tensor product of intervals."""

    def __init__(self, domain: DomainSpec, shift: tuple[int, ...], level: int):
        self.domain, self.shift, self.level = domain, shift, level
        s = 2.0 ** (-level)
        L = domain.L
        self.positions, self.los, self.his = [], [], []
        for j in shift:
            o = _offset(j, level)
            first = math.floor(-L / s - o)
            last = math.ceil(L / s - o) - 1
            pos = np.arange(first, last + 1)
            lo = np.maximum(s * (pos + o), -L)
            hi = np.minimum(s * (pos + 1 + o), L)
            keep = hi > lo
            self.positions.append(pos[keep])
            self.los.append(lo[keep])
            self.his.append(hi[keep])
        self.shape = tuple(len(p) for p in self.positions)

    @cached_property
    def measures(self) -> np.ndarray:
        widths = [hi - lo for lo, hi in zip(self.los, self.his)]
        return widths[0] if self.domain.n == 1 else np.outer(widths[0], widths[1])

    def corner_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self.domain.n == 1:
            return self.los[0], self.his[0]
        X0, Y0 = np.meshgrid(self.los[0], self.los[1], indexing="ij")
        X1, Y1 = np.meshgrid(self.his[0], self.his[1], indexing="ij")
        return np.stack([X0, Y0], -1), np.stack([X1, Y1], -1)

    def integrals(self, prefix: PrefixIntegral) -> np.ndarray:
        lo, hi = self.corner_arrays()
        return prefix.integrate(lo, hi)

    def averages(self, f: GridFunction | PrefixIntegral) -> np.ndarray:
        pre = f if isinstance(f, PrefixIntegral) else PrefixIntegral(f)
        return self.integrals(pre) / self.measures

    @cached_property
    def _cell_ranges(self):
        """Per axis: first and last interval meeting each cell in positive length."""
        e = self.domain.edges()
        tol = MEASURE_RTOL * self.domain.h * 1e3
        out = []
        for lo, hi in zip(self.los, self.his):
            edges = np.r_[lo, hi[-1]]
            first = np.searchsorted(edges, e[:-1] + tol, side="right") - 1
            last = np.searchsorted(edges, e[1:] - tol, side="right") - 1
            n_int = len(lo)
            out.append((np.clip(first, 0, n_int - 1), np.clip(last, 0, n_int - 1)))
        return out

    @cached_property
    def center_index(self) -> list[np.ndarray]:
        c = self.domain.centers()
        out = []
        for lo, hi in zip(self.los, self.his):
            edges = np.r_[lo, hi[-1]]
            out.append(np.clip(np.searchsorted(edges, c, side="right") - 1, 0, len(lo) - 1))
        return out

    def spread_max(self, vals: np.ndarray) -> np.ndarray:
        """Per cell, max of vals over the cubes meeting that cell."""
        axes = []
        for first, last in self._cell_ranges:
            span = int(np.max(last - first))
            axes.append([np.minimum(first + d, last) for d in range(span + 1)])
        if self.domain.n == 1:
            return np.max([vals[i] for i in axes[0]], axis=0)
        best = None
        for ix in axes[0]:
            for iy in axes[1]:
                v = vals[np.ix_(ix, iy)]
                best = v if best is None else np.maximum(best, v)
        return best

    @cached_property
    def _axis_segments(self):
        out = []
        for lo, hi in zip(self.los, self.his):
            cubes, cells, lens = [], [], []
            e = self.domain.edges()
            tol = MEASURE_RTOL * self.domain.h * 1e3
            for i in range(len(lo)):
                i0 = max(int(np.searchsorted(e, lo[i] + tol, side="right")) - 1, 0)
                i1 = min(int(np.searchsorted(e, hi[i] - tol, side="right")) - 1, self.domain.N - 1)
                idx = np.arange(i0, i1 + 1)
                w = np.clip(np.minimum(hi[i], e[idx + 1]) - np.maximum(lo[i], e[idx]), 0.0, None)
                keep = w > 0
                cubes.append(np.full(int(keep.sum()), i))
                cells.append(idx[keep])
                lens.append(w[keep])
            out.append((np.concatenate(cubes), np.concatenate(cells), np.concatenate(lens)))
        return out

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat (cube index, cell index, overlap measure) triples for the whole tiling."""
        if self.domain.n == 1:
            return self._axis_segments[0]
        (qa, ca, la), (qb, cb, lb) = self._axis_segments
        N = self.domain.N
        cube = (qa[:, None] * self.shape[1] + qb[None, :]).ravel()
        cell = (ca[:, None] * N + cb[None, :]).ravel()
        return cube, cell, np.outer(la, lb).ravel()

    def cube_min(self, samples: np.ndarray) -> np.ndarray:
        """Essential inf of cell samples over each cube."""
        cube, cell, _ = self.segments()
        out = np.full(int(np.prod(self.shape)), np.inf)
        np.minimum.at(out, cube, np.asarray(samples, dtype=float).ravel()[cell])
        return out.reshape(self.shape)

    def cube_max(self, samples: np.ndarray) -> np.ndarray:
        cube, cell, _ = self.segments()
        out = np.full(int(np.prod(self.shape)), -np.inf)
        np.maximum.at(out, cube, np.asarray(samples, dtype=float).ravel()[cell])
        return out.reshape(self.shape)

    def cube_integrals(self, samples: np.ndarray) -> np.ndarray:
        """∫_Q of cellwise samples for every cube (exact overlap weights)."""
        cube, cell, mass = self.segments()
        vals = np.asarray(samples, dtype=float).ravel()[cell]
        return np.bincount(cube, vals * mass, int(np.prod(self.shape))).reshape(self.shape)

    def cube_averages(self, samples: np.ndarray) -> np.ndarray:
        return self.cube_integrals(samples) / self.measures

    def spread_center(self, vals: np.ndarray) -> np.ndarray:
        """Per cell, the value of the cube containing the cell center."""
        if self.domain.n == 1:
            return vals[self.center_index[0]]
        return vals[np.ix_(self.center_index[0], self.center_index[1])]

    def cube(self, index) -> DyadicCube:
        index = (index,) if np.isscalar(index) else tuple(index)
        pos = tuple(int(p[i]) for p, i in zip(self.positions, index))
        return DyadicCube(self.domain, self.shift, self.level, pos)

    def cubes(self) -> list[DyadicCube]:
        return [self.cube(idx) for idx in np.ndindex(*self.shape)]


class ShiftedDyadicGrid:
    """Grid D^j restricted to a level window."""

    def __init__(self, domain: DomainSpec, shift: Sequence[int], k_min: int | None = None, k_max: int | None = None):
        shift = tuple(int(j) for j in shift)
        if len(shift) != domain.n or any(j not in (0, 1, 2) for j in shift):
            raise ValueError("shift must be in {0,1,2}^n")
        dk_min, dk_max = default_levels(domain)
        self.domain = domain
        self.shift = shift
        self.k_min = dk_min if k_min is None else k_min
        self.k_max = dk_max if k_max is None else k_max
        if self.k_min > self.k_max:
            raise ValueError("empty level window")
        self._tilings: dict[int, Tiling] = {}

    def tiling(self, level: int) -> Tiling:
        if level not in self._tilings:
            self._tilings[level] = Tiling(self.domain, self.shift, level)
        return self._tilings[level]

    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)


class DyadicSystem:
    """The 3^n shifted grids (or a subset) over a common level window."""

    def __init__(self, domain: DomainSpec, shifts: Iterable[Sequence[int]] | None = None,
                 k_min: int | None = None, k_max: int | None = None):
        if shifts is None:
            shifts = itertools.product(range(3), repeat=domain.n)
        self.domain = domain
        self.grids = [ShiftedDyadicGrid(domain, s, k_min, k_max) for s in shifts]

    def tilings(self) -> Iterator[Tiling]:
        for g in self.grids:
            for k in g.levels():
                yield g.tiling(k)

    def cube_count(self) -> int:
        return sum(int(np.prod(t.shape)) for t in self.tilings())

    def cubes(self) -> Iterator[DyadicCube]:
        for t in self.tilings():
            yield from t.cubes()


_SYSTEMS: dict = {}


def default_system(domain: DomainSpec) -> DyadicSystem:
    """Cached full 3^n-grid system with the default level window."""
    if domain not in _SYSTEMS:
        _SYSTEMS[domain] = DyadicSystem(domain)
    return _SYSTEMS[domain]


def enumerate_cubes(grid: ShiftedDyadicGrid, levels: Iterable[int] | None = None) -> list[DyadicCube]:
    """All cubes of the grid meeting the domain, level by level in lattice order."""
    levels = grid.levels() if levels is None else levels
    out: list[DyadicCube] = []
    for k in levels:
        if k < grid.k_min or k > grid.k_max:
            raise ValueError(f"level {k} outside window [{grid.k_min}, {grid.k_max}]")
        out.extend(grid.tiling(k).cubes())
    return out


def cube_sup(system: DyadicSystem, per_tiling: Callable[[Tiling], np.ndarray]) -> np.ndarray:
    """Cell-wise sup over all enumerated cubes of a per-cube quantity."""
    out = np.full(system.domain.shape, -np.inf)
    for t in system.tilings():
        out = np.maximum(out, t.spread_max(per_tiling(t)))
    return out


# ---------------------------------------------------------------------------
# cell distributions on boxes


def box_cells(domain: DomainSpec, box) -> tuple[tuple, np.ndarray]:
    """Index block and overlap measures of the cells meeting a box."""
    e = domain.edges()
    tol = MEASURE_RTOL * domain.h * 1e3
    idx, parts = [], []
    for lo, hi in box:
        i0 = max(int(np.searchsorted(e, lo + tol, side="right")) - 1, 0)
        i1 = min(int(np.searchsorted(e, hi - tol, side="right")) - 1, domain.N - 1)
        seg = np.clip(np.minimum(hi, e[i0 + 1:i1 + 2]) - np.maximum(lo, e[i0:i1 + 1]), 0.0, None)
        idx.append(slice(i0, i1 + 1))
        parts.append(seg)
    w = parts[0] if domain.n == 1 else np.outer(parts[0], parts[1])
    return tuple(idx), w


def distribution(f: GridFunction | np.ndarray, box, domain: DomainSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Cell values of f on the box and their overlap measures (positive only)."""
    if isinstance(f, GridFunction):
        domain, s = f.domain, f.samples
    else:
        s = np.asarray(f)
    idx, w = box_cells(domain, box)
    v = s[idx].ravel()
    w = w.ravel()
    keep = w > 0
    return v[keep], w[keep]


def _box_of(Q) -> tuple:
    return Q.box if isinstance(Q, DyadicCube) else tuple(Q)


def weighted_lower_median(values: np.ndarray, masses: np.ndarray) -> float:
    """Smallest value whose cumulative mass reaches half the total."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], masses[order]
    cum = np.cumsum(w)
    half = 0.5 * cum[-1] * (1 - MEASURE_RTOL)
    return float(v[np.searchsorted(cum, half, side="left")])


def median(f: GridFunction, Q) -> float:
    """Measure-weighted lower median of f on Q (a DyadicCube or a box)."""
    v, w = distribution(f, _box_of(Q))
    if v.size == 0:
        raise ValueError("cube has zero measure")
    return weighted_lower_median(v, w)


def rearrangement_values(values: np.ndarray, masses: np.ndarray, t: float) -> float:
    """f*(t) = inf{α > 0 : |{|f| > α}| < t} for a finite (value, mass) list."""
    if not t > 0:
        raise ValueError("t must be positive")
    a = np.abs(values)
    keep = (a > 0) & (masses > 0)
    a, w = a[keep], masses[keep]
    if a.size == 0:
        return 0.0
    order = np.argsort(-a, kind="stable")
    a, w = a[order], w[order]
    cum = np.cumsum(w)
    last = np.r_[np.nonzero(np.diff(a))[0], a.size - 1]
    levels, c = a[last], cum[last]
    # |{|f| > α}| for α in [levels[k+1], levels[k]) is c[k]; count how many are < t
    k = int(np.sum(c < t * (1 - MEASURE_RTOL)))
    return float(levels[k]) if k < levels.size else 0.0


def rearrangement(f: GridFunction, t: float, Q=None) -> float:
    """Decreasing rearrangement of f (or of f·1_Q) at t."""
    if Q is None:
        w = np.full(f.samples.size, f.domain.cell_measure)
        return rearrangement_values(f.samples.ravel(), w, t)
    v, w = distribution(f, _box_of(Q))
    return rearrangement_values(v, w, t)


def oscillation_values(values: np.ndarray, masses: np.ndarray, lam: float) -> float:
    """inf_c ((f - c)1_Q)*(λ|Q|) by the shortest-window algorithm.

    For fixed c the rearrangement is the least α whose window [c-α, c+α]
    leaves mass < λ|Q| outside; the best c is the window midpoint, so the
    answer is half the width of the narrowest value window whose complement
    has mass < λ|Q|.
    """
    if not 0 < lam < 1:
        raise ValueError("λ must lie in (0,1)")
    order = np.argsort(values, kind="stable")
    v, w = values[order], masses[order]
    total = w.sum()
    cum = np.r_[0.0, np.cumsum(w)]
    # a window v[i..j] is admissible when its complement has mass < λ|Q|,
    # i.e. the kept mass cum[j+1] - cum[i] exceeds `need`
    need = total - lam * total * (1 - MEASURE_RTOL)
    jp1 = np.searchsorted(cum, cum[:-1] + need, side="right")
    ok = jp1 <= v.size
    i = np.arange(v.size)[ok]
    widths = v[jp1[ok] - 1] - v[i]
    return float(max(widths.min(), 0.0) / 2)


def local_mean_oscillation(f: GridFunction, Q, lam: float) -> float:
    v, w = distribution(f, _box_of(Q))
    return oscillation_values(v, w, lam)


# ---------------------------------------------------------------------------
# sparse families


@dataclass
class SparseFamily:
    """Cubes of one grid, optional coefficients, and a sparsity target."""

    domain: DomainSpec
    shift: tuple[int, ...]
    cubes: list[DyadicCube]
    eta: float = 0.5
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        for c in self.cubes:
            if c.shift != self.shift:
                raise ValueError("cubes from mixed grids")

    def __len__(self):
        return len(self.cubes)

    def coefficient(self, Q: DyadicCube) -> float:
        return self.coefficients.get(Q.key, 1.0)

    def to_json(self) -> str:
        return json.dumps([c.to_dict() for c in self.cubes])

    @classmethod
    def from_json(cls, text: str, domain: DomainSpec, eta: float = 0.5) -> "SparseFamily":
        items = json.loads(text)
        cubes = [DyadicCube(domain, tuple(d["grid_shift"]), int(d["level"]), tuple(d["position"])) for d in items]
        shift = cubes[0].shift if cubes else (0,) * domain.n
        return cls(domain, shift, cubes, eta)

    def s_parents(self) -> dict:
        """Nearest proper ancestor in the family for every cube that has one."""
        keys = {c.key for c in self.cubes}
        kmin = min((c.level for c in self.cubes), default=0)
        out = {}
        for c in self.cubes:
            p = c
            while p.level > kmin:
                p = p.parent()
                if p.key in keys:
                    out[c.key] = p.key
                    break
        return out

    def major_measures(self) -> dict:
        """|E_Q| with E_Q = Q minus its maximal proper descendants in the family."""
        meas = {c.key: c.measure for c in self.cubes}
        e = dict(meas)
        for child, parent in self.s_parents().items():
            e[parent] -= meas[child]
        return e

    def indicator_sum(self, weighted: bool = False) -> np.ndarray:
        """Σ_Q a_Q 1_Q at cell centers (a_Q = 1 unless weighted)."""
        xs = self.domain.center_grid()
        out = np.zeros(self.domain.shape)
        for c in self.cubes:
            out += (self.coefficient(c) if weighted else 1.0) * c.contains_points(*xs)
        return out


@dataclass
class SparseCheck:
    passed: bool
    min_ratio: float
    witness: DyadicCube | None


def verify_sparse(family: SparseFamily, eta: float | None = None) -> SparseCheck:
    """Check |E_Q| ≥ η|Q| for every cube and report the worst one."""
    eta = family.eta if eta is None else eta
    if not family.cubes:
        return SparseCheck(True, 1.0, None)
    e = family.major_measures()
    worst, witness = np.inf, None
    for c in family.cubes:
        r = e[c.key] / c.measure
        if r < worst:
            worst, witness = r, c
    return SparseCheck(bool(worst >= eta * (1 - 1e-12)), float(worst), witness)


def _maximal_dense_children(f: np.ndarray, domain: DomainSpec, Q: DyadicCube, bad: np.ndarray,
                            density: float, depth_level: int) -> list[DyadicCube]:
    """Maximal proper dyadic subcubes P of Q with |P ∩ bad| ≥ density·|P|."""
    pre = PrefixIntegral(bad.astype(float), domain)
    chosen: list[DyadicCube] = []
    frontier = Q.children()
    while frontier:
        lo = np.array([[b[0] for b in c.box] for c in frontier])
        hi = np.array([[b[1] for b in c.box] for c in frontier])
        if domain.n == 1:
            lo, hi = lo[:, 0], hi[:, 0]
        mass = pre.integrate(lo, hi)
        meas = np.array([c.measure for c in frontier])
        nxt = []
        for c, bm, cm in zip(frontier, mass, meas):
            if bm >= density * cm * (1 - MEASURE_RTOL):
                chosen.append(c)
            elif bm > MEASURE_RTOL * cm and c.level < depth_level:
                nxt.extend(c.children())
        frontier = nxt
    return chosen


def lerner_hytonen(f: GridFunction, Q0: DyadicCube, max_retries: int = 3):
    """Sparse decomposition |f - m_f(Q0)| ≤ 2 Σ_{Q∈S} ω_{2^{-n-2}}(f;Q) 1_Q on Q0.

    Children of a selected cube Q are the maximal dyadic P ⊊ Q on which the
    exceptional set {|f - m_f(Q)| > 2ω(f;Q)} has density at least 2^{-n-1}.
    The exceptional set has measure below 2^{-n-2}|Q|, so the children cover
    less than |Q|/2; a non-selected parent keeps the median of each child
    within 2ω of m_f(Q). Descent goes to side h/2 so every exceptional cell
    center is captured. The bound is audited at every cell center of Q0.

    Returns:
        (m_f(Q0), SparseFamily with coefficients ω(f;Q)).
    """
    dom = f.domain
    n = dom.n
    lam = 2.0 ** (-n - 2)
    density = 2.0 ** (-n - 1)
    depth_level = math.ceil(-math.log2(dom.h / 2) - 1e-12)
    m0 = median(f, Q0)
    factor = 2.0
    for _ in range(max_retries):
        cubes, coef = [], {}
        stack = [Q0]
        while stack:
            Q = stack.pop()
            v, w = distribution(f, Q.box)
            mQ = weighted_lower_median(v, w)
            om = oscillation_values(v, w, lam)
            bad = np.abs(f.samples - mQ) > factor * om * (1 + 1e-12)
            kids = _maximal_dense_children(f.samples, dom, Q, bad, density, depth_level) if bad.any() else []
            if om > 0:
                cubes.append(Q)
                coef[Q.key] = om
            stack.extend(kids)
        fam = SparseFamily(dom, Q0.shift, cubes, 0.5, coef)
        ok, _ = audit_decomposition(f, Q0, m0, fam)
        if ok:
            return m0, fam
        factor /= 2
    raise SelfVerificationFailed("pointwise bound failed after threshold refinement")


def audit_decomposition(f: GridFunction, Q0: DyadicCube, m0: float, fam: SparseFamily) -> tuple[bool, float]:
    """Check |f - m0| ≤ 2 Σ ω_Q 1_Q at cell centers in Q0; returns (ok, worst excess)."""
    xs = f.domain.center_grid()
    inside = Q0.contains_points(*xs)
    rhs = 2.0 * fam.indicator_sum(weighted=True)
    lhs = np.abs(f.samples - m0)
    scale = max(float(np.max(np.abs(f.samples))), 1e-300)
    excess = (lhs - rhs)[inside]
    worst = float(excess.max()) if excess.size else 0.0
    return bool(worst <= 1e-12 * scale), worst


def carleson_constant(a: dict, w: GridFunction) -> float:
    """max over ancestors Q0 of the a-cubes of Σ_{Q⊂Q0} a_Q / w(Q0).

    Args:
        a: mapping DyadicCube -> nonnegative number, all cubes in one grid.
        w: weight.
    """
    cubes = [c for c, v in a.items() if v > 0]
    if not cubes:
        return 0.0
    shift = cubes[0].shift
    if any(c.shift != shift for c in cubes):
        raise ValueError("cubes from mixed grids")
    kmin = min(c.level for c in cubes)
    # coarsest ancestors: climb until the cube covers the domain
    top_level = min(kmin, default_levels(w.domain)[0])
    mass: dict = {}
    rep: dict = {}
    for c in cubes:
        p = c
        while True:
            mass[p.key] = mass.get(p.key, 0.0) + a[c]
            rep[p.key] = p
            if p.level <= top_level:
                break
            p = p.parent()
    pre = PrefixIntegral(w)
    best = 0.0
    for key, s in mass.items():
        Q = rep[key]
        if Q.measure <= 0:
            continue
        lo = np.array([b[0] for b in Q.box])
        hi = np.array([b[1] for b in Q.box])
        wq = float(pre.integrate(lo[0], hi[0]) if w.domain.n == 1 else pre.integrate(lo, hi))
        if wq <= 0:
            raise ValueError("weight vanishes on a cube carrying Carleson mass")
        best = max(best, s / wq)
    return best


def sharp_maximal(f: GridFunction, delta: float, system: DyadicSystem | None = None) -> GridFunction:
    """M^♯_δ f: per cell, sup over cubes meeting it of (⟨|f^δ - c|⟩_Q)^{1/δ}, c = median of f^δ."""
    if not 0 < delta < 1:
        raise ValueError("δ must lie in (0,1)")
    system = default_system(f.domain) if system is None else system
    g = np.abs(f.samples) ** delta
    dom = f.domain

    def per_tiling(t: Tiling) -> np.ndarray:
        out = np.zeros(t.shape)
        for idx in np.ndindex(*t.shape):
            box = tuple((t.los[a][i], t.his[a][i]) for a, i in enumerate(idx))
            v, w = distribution(g, box, dom)
            c = weighted_lower_median(v, w)
            out[idx] = np.sum(np.abs(v - c) * w) / np.sum(w)
        return out ** (1.0 / delta)

    return GridFunction(dom, cube_sup(system, per_tiling))


def _quasi_oscillation(v: np.ndarray, w: np.ndarray, gamma: float, chunk: int = 512) -> float:
    """min over c of Σ w|v - c|^γ / Σ w.

    For γ < 1 the objective is concave between consecutive sample values,
    so scanning the samples themselves finds the exact minimum.
    """
    best = np.inf
    for i in range(0, v.size, chunk):
        c = v[i:i + chunk, None]
        best = min(best, float(np.min((np.abs(v[None, :] - c) ** gamma) @ w)))
    return best / float(np.sum(w))


def oscillation_maximal(f: GridFunction, gamma: float, system: DyadicSystem | None = None) -> GridFunction:
    """Per cell, sup over cubes meeting it of inf_c (⨍_Q |f - c|^γ)^{1/γ}.

    Dominates M^♯_γ f pointwise because |a^γ - b^γ| ≤ |a - b|^γ.
    """
    if not 0 < gamma < 1:
        raise ValueError("γ must lie in (0,1)")
    system = default_system(f.domain) if system is None else system
    dom = f.domain

    def per_tiling(t: Tiling) -> np.ndarray:
        out = np.zeros(t.shape)
        for idx in np.ndindex(*t.shape):
            box = tuple((t.los[a][i], t.his[a][i]) for a, i in enumerate(idx))
            v, w = distribution(f.samples, box, dom)
            out[idx] = _quasi_oscillation(v, w, gamma)
        return out ** (1.0 / gamma)

    return GridFunction(dom, cube_sup(system, per_tiling))


def maximal_function(f: GridFunction | np.ndarray, system: DyadicSystem | None = None,
                     domain: DomainSpec | None = None) -> np.ndarray:
    """Hardy–Littlewood maximal samples of |f| over the enumerated cubes."""
    if isinstance(f, GridFunction):
        domain, s = f.domain, f.samples
    else:
        s = np.asarray(f, dtype=float)
    system = default_system(domain) if system is None else system
    pre = PrefixIntegral(np.abs(s), domain)
    return cube_sup(system, lambda t: t.averages(pre))


def _entry_boxes(t: Tiling, cube: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-axis lower/upper edges of the cube owning each segment entry."""
    if t.domain.n == 1:
        return [t.los[0][cube]], [t.his[0][cube]]
    a, b = np.divmod(cube, t.shape[1])
    return [t.los[0][a], t.los[1][b]], [t.his[0][a], t.his[1][b]]


def restricted_maximal_integrals(densities: Sequence[np.ndarray], exponents: Sequence[float],
                                 domain: DomainSpec, system: DyadicSystem | None = None
                                 ) -> list[tuple[Tiling, np.ndarray]]:
    """For every enumerated cube Q, ∫_Q sup_{Q'} ∏_i ⟨σ_i 1_Q⟩_{Q'}^{a_i} dx.

    The inner sup runs over enumerated cubes Q' meeting the cell of x, the
    same convention as ``maximal_function``; ⟨σ 1_Q⟩_{Q'} = σ(Q ∩ Q')/|Q'|.
    Returns a list of (tiling, integrals) pairs.
    """
    system = default_system(domain) if system is None else system
    pres = [PrefixIntegral(np.asarray(s, dtype=float), domain) for s in densities]
    n, N = domain.n, domain.N
    inner = list(system.tilings())
    out = []
    for t in system.tilings():
        cube, cell, mass = t.segments()
        qlo, qhi = _entry_boxes(t, cube)
        cell_ax = [cell] if n == 1 else list(np.divmod(cell, N))
        best = np.zeros(cube.size)
        for t2 in inner:
            choices = []
            for ax, (first, last) in enumerate(t2._cell_ranges):
                span = int(np.max(last - first))
                ca = cell_ax[ax]
                choices.append([np.minimum(first[ca] + d, last[ca]) for d in range(span + 1)])
            for combo in itertools.product(*choices):
                lo = [np.maximum(qlo[ax], t2.los[ax][i]) for ax, i in enumerate(combo)]
                hi = [np.maximum(np.minimum(qhi[ax], t2.his[ax][i]), lo[ax]) for ax, i in enumerate(combo)]
                size = np.prod([t2.his[ax][i] - t2.los[ax][i] for ax, i in enumerate(combo)], axis=0)
                if n == 1:
                    ints = [p.integrate(lo[0], hi[0]) for p in pres]
                else:
                    L_, H_ = np.stack(lo, -1), np.stack(hi, -1)
                    ints = [p.integrate(L_, H_) for p in pres]
                val = np.ones(cube.size)
                for s_int, a in zip(ints, exponents):
                    val = val * (np.maximum(s_int, 0.0) / size) ** a
                best = np.maximum(best, val)
        K = int(np.prod(t.shape))
        out.append((t, np.bincount(cube, best * mass, K).reshape(t.shape)))
    return out
