"""Translation-invariant interactions on {+1,-1}^(Z^d).

An :class:`Interaction` is stored as a finite list of local functions on
anchored shapes (the lexicographic middle element of each shape sits at the
origin) plus an optional power-law two-body kernel
``Phi_{x,y}(w) = -J(x-y) w(x) w(y)`` with ``J(v) = c / |v|^s``.

Configurations of a shape are indexed as binary counters over its
lexicographically sorted sites: the first site is the most significant bit,
and bit value 0 means spin +1, bit value 1 means spin -1.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import lattice
from .lattice import Point

LOCAL_SITE_CAP = 20


class Interval(NamedTuple):
    """Closed interval ``[lo, hi]``; ``lo == hi`` for exact values."""

    lo: float
    hi: float

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __add__(self, other):
        if isinstance(other, Interval):
            return Interval(self.lo + other.lo, self.hi + other.hi)
        return Interval(self.lo + other, self.hi + other)

    def scale(self, t: float) -> "Interval":
        a, b = self.lo * t, self.hi * t
        return Interval(min(a, b), max(a, b))


def config_spins(k: int) -> np.ndarray:
    """(2^k, k) array of spins in binary-counter order."""
    c = np.arange(1 << k, dtype=np.int64)[:, None]
    shifts = np.arange(k - 1, -1, -1, dtype=np.int64)[None, :]
    return (1 - 2 * ((c >> shifts) & 1)).astype(np.int8)


def spins_to_index(spins: Sequence[int]) -> int:
    idx = 0
    for s in spins:
        idx = (idx << 1) | (1 if s < 0 else 0)
    return idx


def restrict_index(k_total: int, positions: Sequence[int]) -> np.ndarray:
    """For every configuration of ``k_total`` sites, the index of its restriction
    to the sites at ``positions`` (in the given order)."""
    c = np.arange(1 << k_total, dtype=np.int64)
    k = len(positions)
    out = np.zeros_like(c)
    for j, p in enumerate(positions):
        out |= ((c >> (k_total - 1 - p)) & 1) << (k - 1 - j)
    return out


@dataclass(frozen=True, eq=False)
class LocalFunction:
    shape: tuple  # lexicographically sorted tuple of points
    table: np.ndarray

    def __post_init__(self):
        shape = tuple(sorted(tuple(int(c) for c in p) for p in self.shape))
        if len(set(shape)) != len(shape) or not shape:
            raise ValueError("local function shape must be a nonempty set")
        if len(shape) > LOCAL_SITE_CAP:
            raise ValueError(f"shape with {len(shape)} sites exceeds cap {LOCAL_SITE_CAP}")
        table = np.array(self.table, dtype=np.float64).reshape(-1)
        if table.size != 1 << len(shape):
            raise ValueError(f"table needs {1 << len(shape)} entries, got {table.size}")
        if not np.all(np.isfinite(table)):
            raise ValueError("table entries must be finite")
        table.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "table", table)

    @classmethod
    def from_function(cls, shape, f) -> "LocalFunction":
        shape = tuple(sorted(tuple(p) for p in shape))
        spins = config_spins(len(shape))
        return cls(shape, [f(tuple(int(s) for s in row)) for row in spins])

    @property
    def size(self) -> int:
        return len(self.shape)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.table)))

    @property
    def var(self) -> float:
        return float(np.max(self.table) - np.min(self.table))

    @property
    def diameter(self) -> int:
        return lattice.diameter(self.shape)

    def value(self, spins: Sequence[int]) -> float:
        return float(self.table[spins_to_index(spins)])

    def is_flip_symmetric(self) -> bool:
        mask = (1 << self.size) - 1
        idx = np.arange(1 << self.size)
        return bool(np.array_equal(self.table, self.table[idx ^ mask]))


@dataclass(frozen=True)
class TwoBodyKernel:
    """Power-law coupling ``J(v) = amplitude / |v|^exponent``.

    The pair energy is ``-J(x - y) w(x) w(y)``.  ``norm`` selects the distance
    used inside the power law ("inf" or "euclid"); shell bookkeeping always
    uses the sup norm.
    """

    amplitude: float
    exponent: float
    truncation_radius: int
    norm: str = "inf"

    def __post_init__(self):
        if self.norm not in ("inf", "euclid"):
            raise ValueError(f"unknown kernel norm {self.norm!r}")
        if self.truncation_radius < 1:
            raise ValueError("kernel truncation radius must be positive")

    def coupling(self, v: Sequence[int]) -> float:
        if not any(v):
            raise ValueError("coupling undefined at zero displacement")
        r = lattice.norm_inf(v) if self.norm == "inf" else math.sqrt(sum(c * c for c in v))
        return self.amplitude / r**self.exponent

    def pair_table(self, v: Sequence[int]) -> np.ndarray:
        j = self.coupling(v)
        return np.array([-j, j, j, -j])

    def same_form(self, other: "TwoBodyKernel") -> bool:
        return (self.exponent, self.truncation_radius, self.norm) == (
            other.exponent, other.truncation_radius, other.norm)


def _anchor_local(lf: LocalFunction) -> LocalFunction:
    anchored, _ = lattice.canonical_anchor(lf.shape)
    return LocalFunction(anchored.sites, lf.table)


class Interaction:
    """Finite part (anchored local functions) plus an optional kernel."""

    def __init__(self, dim: int, local: Iterable[LocalFunction] = (),
                 kernel: TwoBodyKernel | None = None, metadata: Mapping | None = None):
        if not 1 <= dim <= lattice.MAX_DIMENSION:
            raise ValueError(f"dimension {dim} outside 1..{lattice.MAX_DIMENSION}")
        self.dim = dim
        merged: dict[tuple, np.ndarray] = {}
        for lf in local:
            if len(lf.shape[0]) != dim:
                raise ValueError("local function dimension mismatch")
            a = _anchor_local(lf)
            if a.shape in merged:
                merged[a.shape] = merged[a.shape] + a.table
            else:
                merged[a.shape] = a.table
        self.local: dict[tuple, LocalFunction] = {
            s: LocalFunction(s, t) for s, t in sorted(merged.items())}
        if kernel is not None and kernel.exponent <= dim:
            raise ValueError(f"kernel exponent {kernel.exponent} must exceed the dimension {dim}")
        self.kernel = kernel
        self.metadata = dict(metadata or {})

    def __repr__(self) -> str:
        return (f"Interaction(dim={self.dim}, shapes={len(self.local)}, "
                f"kernel={self.kernel!r})")

    @property
    def finite_range(self) -> int:
        return max((lf.diameter for lf in self.local.values()), default=0)

    def is_zero(self) -> bool:
        no_kernel = self.kernel is None or self.kernel.amplitude == 0
        return no_kernel and all(not np.any(lf.table) for lf in self.local.values())

    def scaled(self, t: float) -> "Interaction":
        kernel = None
        if self.kernel is not None:
            k = self.kernel
            kernel = TwoBodyKernel(k.amplitude * t, k.exponent, k.truncation_radius, k.norm)
        return Interaction(self.dim, [LocalFunction(lf.shape, lf.table * t)
                                      for lf in self.local.values()], kernel, self.metadata)

    def tables_equal(self, other: "Interaction", atol: float = 0.0) -> bool:
        """Shape-wise table equality, ignoring identically zero tables."""
        shapes = set(self.local) | set(other.local)
        for s in shapes:
            a = self.local[s].table if s in self.local else np.zeros(1 << len(s))
            b = other.local[s].table if s in other.local else np.zeros(1 << len(s))
            if not np.allclose(a, b, rtol=0.0, atol=atol):
                return False
        return self.kernel == other.kernel


# -- constructors ---------------------------------------------------------------

def zero(d: int) -> Interaction:
    return Interaction(d)


def ising(beta: float, d: int) -> Interaction:
    """Nearest-neighbour Ising interaction ``-beta w(x) w(y)``."""
    o = lattice.origin(d)
    table = [-beta, beta, beta, -beta]
    return Interaction(d, [LocalFunction((o, lattice.unit(d, i)), table) for i in range(d)])


def ising_with_field(beta: float, h: float, d: int) -> Interaction:
    phi = ising(beta, d)
    if h == 0:
        return phi
    field_term = LocalFunction((lattice.origin(d),), [-h, h])
    return Interaction(d, list(phi.local.values()) + [field_term])


def power_law(amplitude: float, exponent: float, d: int, truncation_radius: int,
              norm: str = "inf") -> Interaction:
    return Interaction(d, kernel=TwoBodyKernel(amplitude, exponent, truncation_radius, norm))


def constant(c: float, d: int) -> Interaction:
    """Constant ``c`` on every singleton: shifts each site's energy by ``c``."""
    return Interaction(d, [LocalFunction((lattice.origin(d),), [c, c])])


def materialize_kernel(kernel: TwoBodyKernel, d: int, radius: int | None = None) -> list[LocalFunction]:
    """Anchored pair tables of ``kernel`` for all displacements up to ``radius``."""
    radius = kernel.truncation_radius if radius is None else radius
    o = lattice.origin(d)
    out = []
    for v in itertools.product(range(-radius, radius + 1), repeat=d):
        if v > o:
            out.append(LocalFunction((o, v), kernel.pair_table(v)))
    return out


def materialized(phi: Interaction, radius: int | None = None) -> Interaction:
    """Copy of ``phi`` with its kernel replaced by finite pair tables."""
    if phi.kernel is None:
        return phi
    radius = phi.kernel.truncation_radius if radius is None else radius
    meta = dict(phi.metadata)
    meta["materialized_radius"] = radius
    meta["discarded_tail"] = kernel_tail(phi.kernel, d=phi.dim, radius=radius).hi / 2
    return Interaction(phi.dim, list(phi.local.values()) + materialize_kernel(phi.kernel, phi.dim, radius),
                       None, meta)


def add(phi: Interaction, psi: Interaction) -> Interaction:
    """Shape-wise sum.

    Kernels of the same form are merged by adding amplitudes.  Otherwise the
    kernel of ``psi`` is materialized up to its truncation radius and the
    discarded tail (sum over anchored pairs beyond it) is recorded in
    ``metadata["discarded_tail"]``.
    """
    if phi.dim != psi.dim:
        raise ValueError(f"dimension mismatch: {phi.dim} vs {psi.dim}")
    local = list(phi.local.values()) + list(psi.local.values())
    meta = {**phi.metadata, **psi.metadata}
    kernel = phi.kernel
    if psi.kernel is not None:
        if kernel is None:
            kernel = psi.kernel
        elif kernel.same_form(psi.kernel):
            kernel = TwoBodyKernel(kernel.amplitude + psi.kernel.amplitude, kernel.exponent,
                                   kernel.truncation_radius, kernel.norm)
        else:
            local += materialize_kernel(psi.kernel, psi.dim)
            tail = kernel_tail(psi.kernel, d=psi.dim, radius=psi.kernel.truncation_radius).hi / 2
            meta["discarded_tail"] = meta.get("discarded_tail", 0.0) + tail
    return Interaction(phi.dim, local, kernel, meta)


def random_interaction(rng: np.random.Generator, d: int = 2, n_shapes: int = 3,
                       max_sites: int = 3, max_diam: int = 2, scale: float = 1.0,
                       symmetric: bool = False, l1_connected: bool = False) -> Interaction:
    """Random finite interaction with small shapes and uniform(-scale, scale) tables."""
    local = []
    box = range(-max_diam, max_diam + 1)
    while len(local) < n_shapes:
        k = int(rng.integers(1, max_sites + 1))
        if l1_connected:
            pts = {lattice.origin(d)}
            while len(pts) < k:
                p = list(pts)[int(rng.integers(len(pts)))]
                q = lattice.add(p, lattice.unit(d, int(rng.integers(d)), int(rng.choice((-1, 1)))))
                if lattice.diameter(pts | {q}) <= max_diam:
                    pts.add(q)
        else:
            pts = {lattice.origin(d)}
            while len(pts) < k:
                pts.add(tuple(int(rng.choice(box)) for _ in range(d)))
            if lattice.diameter(pts) > max_diam:
                continue
        table = rng.uniform(-scale, scale, size=1 << len(pts))
        if symmetric:
            idx = np.arange(table.size)
            table = 0.5 * (table + table[idx ^ (table.size - 1)])
        local.append(LocalFunction(tuple(pts), table))
    return Interaction(d, local)


# -- evaluation -----------------------------------------------------------------

def _spins_for(sites: Sequence[Point], omega) -> list[int]:
    if isinstance(omega, Mapping):
        try:
            return [int(omega[p]) for p in sites]
        except KeyError as exc:
            raise ValueError(f"configuration does not cover site {exc.args[0]}") from None
    vals = [int(s) for s in omega]
    if len(vals) != len(sites):
        raise ValueError("configuration length does not match the shape")
    return vals


def evaluate(phi: Interaction, sites, omega) -> float:
    """Value of ``Phi_Lambda(omega)``.

    ``omega`` is a mapping from sites to spins, or a sequence aligned with the
    lexicographically sorted sites.
    """
    s = lattice.as_site_set(sites)
    spins = _spins_for(s.sites, omega)
    anchored, _ = lattice.canonical_anchor(s)
    value = 0.0
    lf = phi.local.get(anchored.sites)
    if lf is not None:
        value += lf.value(spins)
    if phi.kernel is not None and len(s) == 2:
        v = lattice.sub(s.sites[1], s.sites[0])
        value += -phi.kernel.coupling(v) * spins[0] * spins[1]
    return value


def resolve_radius(phi: Interaction, truncation_radius: int | None) -> int:
    """Check and default the truncation radius.

    The finite part is always summed in full, so the radius may not be smaller
    than its range.  Kernel pairs are kept up to the radius.
    """
    fr = phi.finite_range
    if truncation_radius is None:
        r = phi.kernel.truncation_radius if phi.kernel is not None else 0
        return max(r, fr)
    if truncation_radius < fr:
        raise ValueError(f"truncation radius {truncation_radius} below finite-part range {fr}")
    return int(truncation_radius)


def iter_terms(phi: Interaction, sites, truncation_radius: int | None = None,
               inside_only: bool = False):
    """All translated shapes ``Delta`` meeting ``sites`` (or contained in it).

    Yields ``(delta_sites, table)`` with ``delta_sites`` lexicographically
    sorted and ``table`` indexed in binary-counter order over them.
    """
    vol = lattice.as_site_set(sites)
    r = resolve_radius(phi, truncation_radius)
    members = vol.index
    for shape, lf in phi.local.items():
        shifts = {lattice.sub(x, p) for x in vol.sites for p in shape}
        for a in sorted(shifts):
            delta = tuple(lattice.add(p, a) for p in shape)
            if inside_only and not all(q in members for q in delta):
                continue
            yield delta, lf.table
    k = phi.kernel
    if k is None or k.amplitude == 0:
        return
    o = lattice.origin(phi.dim)
    disps = [v for v in itertools.product(range(-r, r + 1), repeat=phi.dim) if v > o]
    for v in disps:
        table = k.pair_table(v)
        pairs = set()
        for x in vol.sites:
            y = lattice.add(x, v)
            if not inside_only or y in members:
                pairs.add((x, y))
            if not inside_only:
                pairs.add((lattice.sub(x, v), x))
        for pair in sorted(pairs):
            yield pair, table


# -- kernel tail sums -------------------------------------------------------------

_WEIGHT_DEGREE = {"abs": 0, "var": 0, "decay": 1, "decay_prime": 1}
_WEIGHT_CONST = {"abs": 1.0, "var": 2.0, "decay": 1.0, "decay_prime": 0.5}
_MAX_SHELLS = 20_000_000
_EUCLID_EXACT_SHELLS = {1: 100_000, 2: 200, 3: 40, 4: 12}


def _shell_counts(n: np.ndarray, d: int) -> np.ndarray:
    return (2 * n + 1) ** d - (2 * n - 1) ** d


def _euclid_shell(n: int, d: int, s: float) -> float:
    """Exact sum of |x|_2^-s over the sup-norm shell of radius n."""
    ax = np.arange(-n, n + 1, dtype=np.float64)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    sq = sum(g * g for g in grids)
    linf = np.max(np.abs(np.stack(grids)), axis=0)
    return float(np.sum(sq[linf == n] ** (-s / 2)))


@functools.lru_cache(maxsize=512)
def kernel_shell_sum(kernel: TwoBodyKernel, d: int, weight: str = "abs", start: int = 1,
                     rel_tol: float = 1e-6) -> Interval:
    """Rigorous interval for ``sum_{|x|_inf >= start} w(|x|_inf) |J(x)|``.

    ``w(n) = const * (n+1)^(d*deg)`` per the chosen norm weight.  Shells are
    summed exactly (for the Euclidean form, up to a fixed shell count, after
    which each shell is bracketed between its sup-norm bounds) until the integral-comparison remainder drops below
    ``rel_tol`` times the partial sum; the remainder is added to the upper end.
    """
    c = abs(kernel.amplitude)
    s = kernel.exponent
    kdeg = d * _WEIGHT_DEGREE[weight]
    wc = _WEIGHT_CONST[weight]
    p = s - (d - 1) - kdeg
    if p <= 1:
        need = "2d" if kdeg else "d"
        raise ValueError(f"kernel exponent {s} too small for convergence of the {weight} sum (need s > {need})")
    if c == 0:
        return Interval(0.0, 0.0)
    start = max(1, int(start))

    def remainder(n_last: int) -> float:
        # shells n > n_last: count <= 2d (2+1/N)^(d-1) n^(d-1), (n+1) <= (1+1/N) n
        nn = max(n_last, 1)
        const = c * wc * 2 * d * (2 + 1 / nn) ** (d - 1) * (1 + 1 / nn) ** kdeg
        return const * n_last ** (1 - p) / (p - 1)

    lo = hi = 0.0
    n = start - 1
    if kernel.norm == "euclid":
        while n < _EUCLID_EXACT_SHELLS[d] and n < _MAX_SHELLS:
            n += 1
            term = _euclid_shell(n, d, s) * wc * (n + 1) ** kdeg * c
            lo += term
            hi += term
            if remainder(n) <= rel_tol * lo:
                return Interval(lo, hi + remainder(n))
    chunk = 1024
    while True:
        ns = np.arange(n + 1, n + 1 + chunk, dtype=np.float64)
        upper = _shell_counts(ns, d) * (wc * (ns + 1) ** kdeg) * c * ns ** (-s)
        hi += float(np.sum(upper))
        if kernel.norm == "inf":
            lo = hi
        else:
            # |x|_inf <= |x|_2 <= sqrt(d) |x|_inf on each shell
            lo += float(np.sum(upper)) * d ** (-s / 2)
        n += chunk
        rem = remainder(n)
        if rem <= rel_tol * max(lo, 1e-300) or n >= _MAX_SHELLS:
            return Interval(lo, hi + rem)
        chunk = min(chunk * 2, 1 << 20)


def kernel_tail(kernel: TwoBodyKernel, d: int, radius: int, rel_tol: float = 1e-6) -> Interval:
    """Sum of |J(x)| over all x with |x|_inf > radius."""
    return kernel_shell_sum(kernel, d, "abs", radius + 1, rel_tol)


# -- Hamiltonian ------------------------------------------------------------------

def hamiltonian(phi: Interaction, sites, omega: Mapping, truncation_radius: int | None = None,
                inside_only: bool = False) -> tuple[float, float]:
    """Energy of all shapes meeting ``sites`` (diameter at most the radius for
    kernel pairs) and a bound on the neglected kernel tail.

    ``omega`` maps every site within the interaction reach of ``sites`` to a
    spin.  ``inside_only`` restricts to shapes contained in ``sites``.
    """
    vol = lattice.as_site_set(sites)
    r = resolve_radius(phi, truncation_radius)
    value = 0.0
    for delta, table in iter_terms(phi, vol, r, inside_only):
        value += float(table[spins_to_index(_spins_for(delta, omega))])
    tail = 0.0
    if phi.kernel is not None and phi.kernel.amplitude != 0:
        tail = len(vol) * kernel_tail(phi.kernel, phi.dim, r).hi
    return value, tail


def a_phi(phi: Interaction, omega: Mapping, truncation_radius: int | None = None) -> tuple[float, float]:
    """``-sum Phi_L(omega)`` over shapes whose middle element is the origin."""
    r = resolve_radius(phi, truncation_radius)
    value = 0.0
    for shape, lf in phi.local.items():
        value -= lf.value(_spins_for(shape, omega))
    tail = 0.0
    k = phi.kernel
    if k is not None and k.amplitude != 0:
        o = lattice.origin(phi.dim)
        s0 = _spins_for([o], omega)[0]
        for v in itertools.product(range(-r, r + 1), repeat=phi.dim):
            if v > o:
                value += k.coupling(v) * s0 * _spins_for([v], omega)[0]
        tail = kernel_tail(k, phi.dim, r).hi / 2
    return value, tail


# -- norms ------------------------------------------------------------------------

def _norm(phi: Interaction, weight: str, rel_tol: float) -> Interval:
    d = phi.dim
    k = phi.kernel
    total = 0.0
    overlap = []
    for shape, lf in phi.local.items():
        table = lf.table
        if k is not None and len(shape) == 2 and k.amplitude != 0:
            v = shape[1]
            table = table + k.pair_table(v)
            overlap.append(v)
        n = len(shape)
        diam = lf.diameter
        sup = float(np.max(np.abs(table)))
        if weight == "abs":
            total += n * sup
        elif weight == "decay":
            total += n * (diam + 1) ** d * sup
        elif weight == "decay_prime":
            total += (diam + 1) ** d * sup
        elif weight == "var":
            total += n * (n - 1) * float(np.max(table) - np.min(table))
    result = Interval(total, total)
    if k is not None and k.amplitude != 0:
        shells = kernel_shell_sum(k, d, weight, 1, rel_tol)
        # pair shapes already counted with their combined table
        wc = _WEIGHT_CONST[weight]
        kdeg = d * _WEIGHT_DEGREE[weight]
        dup = sum(2 * wc * (lattice.norm_inf(v) + 1) ** kdeg * abs(k.coupling(v)) for v in overlap)
        result = result + Interval(shells.lo - dup, shells.hi - dup)
    return result


def norm_abs(phi: Interaction, rel_tol: float = 1e-6) -> Interval:
    """``||Phi|| = sum_{0 in L} sup |Phi_L|``."""
    return _norm(phi, "abs", rel_tol)


def norm_decay(phi: Interaction, rel_tol: float = 1e-6) -> Interval:
    """d-th order decaying norm: weights ``(diam+1)^d``."""
    return _norm(phi, "decay", rel_tol)


def norm_decay_prime(phi: Interaction, rel_tol: float = 1e-6) -> Interval:
    """Primed norm: weights ``|L|^-1 (diam+1)^d``."""
    return _norm(phi, "decay_prime", rel_tol)


def norm_var(phi: Interaction, rel_tol: float = 1e-6) -> Interval:
    """``sum_{0 in L} (|L|-1) var_L Phi``."""
    return _norm(phi, "var", rel_tol)


def all_norms(phi: Interaction, rel_tol: float = 1e-6) -> dict[str, Interval]:
    return {"abs": norm_abs(phi, rel_tol), "decay": norm_decay(phi, rel_tol),
            "decay_prime": norm_decay_prime(phi, rel_tol), "var": norm_var(phi, rel_tol)}


def power_law_m_eps(d: int, eps: float, rel_tol: float = 1e-9) -> Interval:
    """``M_eps = sum_n ((2n+1)^d - (2n-1)^d) (n+1)^d n^-(2d+eps)``."""
    unit_kernel = TwoBodyKernel(1.0, 2 * d + eps, 1, "inf")
    return kernel_shell_sum(unit_kernel, d, "decay", 1, rel_tol)


# -- predicates -------------------------------------------------------------------

def is_spin_flip_symmetric(phi: Interaction) -> bool:
    return all(lf.is_flip_symmetric() for lf in phi.local.values())


def is_zero_on_non_l1_connected(phi: Interaction) -> bool:
    if phi.kernel is not None and phi.kernel.amplitude != 0:
        return False
    return all(lattice.is_l1_connected(shape) for shape, lf in phi.local.items()
               if np.any(lf.table))


# -- rectangle-hull transform -----------------------------------------------------

def rectangle_transform(psi: Interaction) -> Interaction:
    """Regroup every local function onto the rectangle hull of its shape."""
    if psi.kernel is not None:
        raise ValueError("materialize the kernel before the rectangle transform")
    acc: dict[tuple, np.ndarray] = {}
    for shape, lf in psi.local.items():
        hull = lattice.rectangle_hull(shape)
        if hull.size > LOCAL_SITE_CAP:
            raise ValueError(f"rectangle hull with {hull.size} sites exceeds cap {LOCAL_SITE_CAP}")
        anchored, m = lattice.canonical_anchor(hull.site_set())
        rect = anchored.sites
        pos = {p: i for i, p in enumerate(rect)}
        placed = [lattice.sub(p, m) for p in shape]
        sub = restrict_index(len(rect), [pos[p] for p in placed])
        contribution = lf.table[sub]
        acc[rect] = acc[rect] + contribution if rect in acc else contribution
    return Interaction(psi.dim, [LocalFunction(s, t) for s, t in acc.items()], None,
                       dict(psi.metadata))


def is_rectangle(shape) -> bool:
    s = lattice.as_site_set(shape)
    return s.hull.size == len(s)


def symmetric_nn_noise(rng: np.random.Generator, d: int, target_norm_abs: float) -> Interaction:
    """Random spin-flip symmetric nearest-neighbour pair tables with
    ``||Psi|| = target_norm_abs``."""
    o = lattice.origin(d)
    local = []
    for i in range(d):
        a, b = rng.uniform(-1, 1, size=2)
        local.append(LocalFunction((o, lattice.unit(d, i)), [a, b, b, a]))
    psi = Interaction(d, local)
    return with_norm_abs(psi, target_norm_abs)


def with_norm_abs(psi: Interaction, target: float) -> Interaction:
    """``psi`` rescaled so that its absolute norm equals ``target``."""
    current = norm_abs(psi).hi
    if current == 0:
        return psi
    return psi.scaled(target / current)


# -- serialization ----------------------------------------------------------------

FORMAT_NAME = "gibbslab-interaction"


def to_dict(phi: Interaction) -> dict:
    k = phi.kernel
    return {
        "format": FORMAT_NAME,
        "version": 1,
        "dimension": phi.dim,
        "kernel": None if k is None else {
            "form": "power_law", "norm": k.norm, "amplitude": k.amplitude,
            "exponent": k.exponent, "truncation_radius": k.truncation_radius},
        "local_functions": [
            {"shape": [list(p) for p in lf.shape], "table": [float(v) for v in lf.table]}
            for lf in phi.local.values()],
        "metadata": phi.metadata,
    }


def from_dict(doc: Mapping) -> Interaction:
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} document")
    kd = doc.get("kernel")
    kernel = None
    if kd is not None:
        if kd.get("form") != "power_law":
            raise ValueError(f"unknown kernel form {kd.get('form')!r}")
        kernel = TwoBodyKernel(float(kd["amplitude"]), float(kd["exponent"]),
                               int(kd["truncation_radius"]), kd.get("norm", "inf"))
    local = [LocalFunction(tuple(tuple(p) for p in e["shape"]), e["table"])
             for e in doc.get("local_functions", [])]
    return Interaction(int(doc["dimension"]), local, kernel, doc.get("metadata") or {})


def dumps(phi: Interaction) -> str:
    # float repr round-trips exactly
    return json.dumps(to_dict(phi), indent=1)


def loads(text: str) -> Interaction:
    return from_dict(json.loads(text))
