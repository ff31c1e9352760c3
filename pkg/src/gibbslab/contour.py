"""Peierls contours for configurations that are +1 outside a finite volume.

A plaquette is the (d-1)-face dual to a nearest-neighbour edge.  It is stored
as the edge ``(x, y)`` with ``y = x + e_i``.  Plaquettes are compared as
unoriented faces; which side is interior follows from the contour's interior.
Closed faces are handled in doubled coordinates, where the face of edge
``(x, x + e_i)`` is the point ``x + y`` on axis ``i`` thickened by one in every
other axis.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import lattice
from .gibbs import BoundaryCondition, build_gibbs
from .interaction import (Interaction, add, hamiltonian, ising, is_spin_flip_symmetric,
                          is_zero_on_non_l1_connected, iter_terms, norm_abs, spins_to_index)
from .lattice import Point, SiteSet

CENSUS_MAX_N = 14


def _edge(x: Point, y: Point) -> tuple[Point, Point]:
    return (x, y) if x < y else (y, x)


def _axis(edge) -> int:
    x, y = edge
    return next(i for i in range(len(x)) if x[i] != y[i])


def face_vertices(edge) -> list[Point]:
    """Corners of the closed face of ``edge`` in doubled coordinates."""
    x, y = edge
    i = _axis(edge)
    c = lattice.add(x, y)
    ranges = [(c[j],) if j == i else (c[j] - 1, c[j] + 1) for j in range(len(c))]
    return list(itertools.product(*ranges))


def faces_intersect(e1, e2) -> bool:
    a, b = lattice.add(*e1), lattice.add(*e2)
    i, j = _axis(e1), _axis(e2)
    for k in range(len(a)):
        lo1, hi1 = (a[k], a[k]) if k == i else (a[k] - 1, a[k] + 1)
        lo2, hi2 = (b[k], b[k]) if k == j else (b[k] - 1, b[k] + 1)
        if hi1 < lo2 or hi2 < lo1:
            return False
    return True


def boundary_plaquettes(sites) -> frozenset:
    """Edges between ``sites`` and their complement: the faces of dM(sites)."""
    s = lattice.as_site_set(sites)
    if not len(s):
        return frozenset()
    d = s.dim
    out = set()
    for x in s.sites:
        for i in range(d):
            for sgn in (1, -1):
                y = lattice.add(x, lattice.unit(d, i, sgn))
                if y not in s:
                    out.add(_edge(x, y))
    return frozenset(out)


@dataclass(frozen=True)
class Contour:
    plaquettes: frozenset
    interior: SiteSet

    def __len__(self) -> int:
        return len(self.plaquettes)

    def __eq__(self, other) -> bool:
        return isinstance(other, Contour) and self.plaquettes == other.plaquettes

    def __hash__(self) -> int:
        return hash(self.plaquettes)

    @classmethod
    def from_interior(cls, sites) -> "Contour":
        s = lattice.as_site_set(sites)
        return cls(boundary_plaquettes(s), s)

    def oriented(self) -> list[tuple[Point, Point]]:
        """Plaquettes as (interior side, exterior side) pairs."""
        return sorted((x, y) if x in self.interior else (y, x) for x, y in self.plaquettes)


def interior_by_parity(plaquettes: Iterable) -> SiteSet:
    """Sites enclosed by a closed plaquette set (odd crossings along +e_1)."""
    lines = defaultdict(list)
    for x, y in plaquettes:
        if _axis((x, y)) == 0:
            lines[x[1:]].append(x[0])
    inside = []
    for rest, xs in lines.items():
        xs.sort()
        if len(xs) % 2:
            raise ValueError("plaquette set is not closed")
        for a, b in zip(xs[::2], xs[1::2]):
            inside.extend((t,) + rest for t in range(a + 1, b + 1))
    return SiteSet(inside)


def _components(plaquettes: Iterable) -> list[list]:
    """Group plaquettes whose closed faces intersect (share a corner)."""
    plaqs = list(plaquettes)
    parent = list(range(len(plaqs)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner = {}
    for i, e in enumerate(plaqs):
        for v in face_vertices(e):
            j = owner.setdefault(v, i)
            if j != i:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[ri] = rj
    groups = defaultdict(list)
    for i, e in enumerate(plaqs):
        groups[find(i)].append(e)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


# -- configurations in Omega^+ ---------------------------------------------------

def _minus_set(omega, volume=None) -> set:
    if isinstance(omega, Mapping):
        return {tuple(p) for p, s in omega.items() if s == -1}
    if volume is None:
        raise ValueError("a spin sequence needs its volume")
    vol = lattice.as_site_set(volume)
    return {p for p, s in zip(vol.sites, omega) if s == -1}


def minus_region(omega, volume=None) -> SiteSet:
    """Sites where the configuration is -1 (it is +1 outside the volume)."""
    minus = _minus_set(omega, volume)
    if volume is not None:
        vol = lattice.as_site_set(volume)
        stray = [p for p in minus if p not in vol]
        if stray:
            raise ValueError(f"-1 spins outside the volume: {stray[:3]}")
    return SiteSet(minus)


def configuration(volume, minus: Iterable = ()) -> dict:
    """Spin mapping on ``volume`` that is -1 exactly on ``minus``."""
    minus = {tuple(p) for p in minus}
    return {p: (-1 if p in minus else 1) for p in lattice.as_site_set(volume)}


def extract_contours(omega, volume=None) -> list[Contour]:
    minus = minus_region(omega, volume)
    if not len(minus):
        return []
    out = []
    for comp in _components(boundary_plaquettes(minus)):
        plaqs = frozenset(comp)
        interior = interior_by_parity(plaqs)
        if boundary_plaquettes(interior) != plaqs:
            raise RuntimeError("contour interior does not reproduce its plaquettes")
        out.append(Contour(plaqs, interior))
    return out


def flip(omega: Mapping, gamma: Contour, volume=None) -> dict:
    """Negate the spins on the interior of ``gamma`` (a contour of ``omega``)."""
    if gamma not in extract_contours(omega, volume):
        raise ValueError("contour is not a component of the configuration's boundary")
    vol = lattice.as_site_set(volume) if volume is not None else SiteSet(omega)
    if not gamma.interior.issubset(vol):
        raise ValueError("contour interior leaves the volume")
    out = dict(omega) if isinstance(omega, Mapping) else dict(zip(vol.sites, omega))
    for p in vol.sites:
        out.setdefault(p, 1)
    for p in gamma.interior:
        out[p] = -out[p]
    return out


def flip_interior(omega: Mapping, interior) -> dict:
    out = dict(omega)
    for p in lattice.as_site_set(interior):
        out[p] = -out.get(p, 1)
    return out


def opposite_edges(minus) -> int:
    """Nearest-neighbour edges with opposite spins (all touch the -1 region)."""
    return len(boundary_plaquettes(minus))


# -- combinatorics ----------------------------------------------------------------

def compute_cd(d: int, include_self: bool = False) -> int:
    """Number of (d-1)-faces meeting the reference face {1/2} x [-1/2,1/2]^(d-1)."""
    if d < 2:
        raise ValueError("C_d needs d >= 2")
    o = lattice.origin(d)
    ref = (o, lattice.unit(d, 0))
    faces = set()
    for x in itertools.product(range(-2, 3), repeat=d):
        for i in range(d):
            faces.add(_edge(x, lattice.add(x, lattice.unit(d, i))))
    count = sum(1 for f in faces if faces_intersect(f, ref))
    return count if include_self else count - 1


def _linf_neighbours(d: int) -> list[Point]:
    return [v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)]


def enumerate_c_connected(n_max: int, d: int = 2) -> dict[tuple, int]:
    """Translation classes of c-connected sets whose contour has at most
    ``n_max`` plaquettes, mapped to their plaquette count.

    Sets are grown cell by cell through sup-norm neighbours; classes are
    deduplicated on their translation-normalized form.  Growth is pruned by the
    perimeter bound ``|dM(S)| >= 2 * sum(hull sides)``.
    """
    offsets = _linf_neighbours(d)
    o = lattice.origin(d)
    start = (o,)
    seen = {start}
    frontier = [start]
    result = {}
    while frontier:
        nxt = []
        for shape in frontier:
            cells = set(shape)
            per = len(boundary_plaquettes(cells))
            if per <= n_max and lattice.is_c_connected(cells):
                result[shape] = per
            for p in shape:
                for v in offsets:
                    q = lattice.add(p, v)
                    if q in cells:
                        continue
                    grown = cells | {q}
                    lo = [min(c[i] for c in grown) for i in range(d)]
                    hi = [max(c[i] for c in grown) for i in range(d)]
                    if 2 * sum(b - a + 1 for a, b in zip(lo, hi)) > n_max:
                        continue
                    canon = tuple(sorted(lattice.sub(c, lo) for c in grown))
                    if canon not in seen:
                        seen.add(canon)
                        nxt.append(canon)
        frontier = nxt
    return result


def contour_census(n_max: int, d: int = 2) -> dict[int, int]:
    """``|Gamma_{n,0}|`` for even ``n <= n_max``: contours of length n whose
    interior contains the origin."""
    if d != 2:
        raise ValueError("the contour census is implemented for d = 2")
    if n_max > CENSUS_MAX_N:
        raise ValueError(f"n_max {n_max} over the census cap {CENSUS_MAX_N}")
    counts = {n: 0 for n in range(4, n_max + 1, 2)}
    for shape, per in enumerate_c_connected(n_max, d).items():
        # each translation class has |S| placements containing the origin
        counts[per] = counts.get(per, 0) + len(shape)
    return counts


def census_bound(n: int, cd: int) -> int:
    return (n + 1) * cd ** (2 * n + 1)


def census_rows(n_max: int, d: int = 2) -> list[dict]:
    cd = compute_cd(d)
    rows = []
    for n, count in sorted(contour_census(n_max, d).items()):
        bound = census_bound(n, cd)
        rows.append({"n": n, "count": count, "bound": bound, "ratio": count / bound})
    return rows


def epsilon_of_l(L: float, d: int = 2, cd: int | None = None) -> float:
    """``C_d * sum_{k>=1} (k+1) q^k`` with ``q = exp(-2 (L - log C_d))``."""
    cd = compute_cd(d) if cd is None else cd
    if L <= math.log(cd):
        raise ValueError(f"series diverges for L <= log C_d = {math.log(cd):.6f}")
    q = math.exp(-2.0 * (L - math.log(cd)))
    return cd * (2 * q - q * q) / (1 - q) ** 2


def epsilon_grid(d: int = 2, step: float = 0.01, count: int = 400) -> list[tuple[float, float]]:
    """ε(L) on the grid ``L_k = ceil(log C_d / step) * step + k * step`` (k >= 1)."""
    cd = compute_cd(d)
    base = math.ceil(math.log(cd) / step) * step
    out = []
    for k in range(1, count + 1):
        L = round(base + k * step, 10)
        out.append((L, epsilon_of_l(L, d, cd)))
    return out


def epsilon_threshold(d: int = 2, step: float = 0.01, count: int = 400) -> float | None:
    """Smallest grid L with ε(L) < 1/2."""
    for L, eps in epsilon_grid(d, step, count):
        if eps < 0.5:
            return L
    return None


# -- perturbed Peierls ------------------------------------------------------------

def _require_peierls_perturbation(psi: Interaction) -> list[str]:
    problems = []
    if psi.kernel is not None:
        problems.append("perturbation has a kernel; materialize it first")
    if not is_spin_flip_symmetric(psi):
        problems.append("perturbation is not spin-flip symmetric")
    if not is_zero_on_non_l1_connected(psi):
        problems.append("perturbation is nonzero on a set that is not l1-connected")
    return problems


def _plus_extended(omega: Mapping, phi: Interaction, volume: SiteSet, radius: int) -> dict:
    reach = max(radius, phi.finite_range)
    out = {}
    box = volume.hull.enlarged(reach)
    for p in box.points():
        out[p] = omega.get(p, 1)
    return out


def delta_term(psi: Interaction, volume, omega: Mapping, gamma: Contour) -> float:
    """``-sum (Psi_D(w) - Psi_D(w_gamma))`` over shapes D meeting the volume that
    straddle the interior of ``gamma``."""
    problems = _require_peierls_perturbation(psi)
    if problems:
        raise ValueError("; ".join(problems))
    vol = lattice.as_site_set(volume)
    if not gamma.interior.issubset(vol):
        raise ValueError("contour interior leaves the volume")
    interior = set(gamma.interior)
    ext = _plus_extended(dict(omega), psi, vol, psi.finite_range)
    flipped = flip_interior(ext, interior)
    total = 0.0
    for delta, table in iter_terms(psi, vol):
        inside = sum(1 for q in delta if q in interior)
        if 0 < inside < len(delta):
            a = table[spins_to_index([ext[q] for q in delta])]
            b = table[spins_to_index([flipped[q] for q in delta])]
            total -= a - b
    return float(total)


def weight_identity_gap(beta: float, psi: Interaction, volume, omega: Mapping,
                        gamma: Contour) -> float:
    """|(-H(w)) - (-2 beta |gamma| + delta - H(w_gamma))| in the log domain,
    with the Hamiltonian of ``ising(beta) + psi`` and +1 outside the volume."""
    vol = lattice.as_site_set(volume)
    phi = add(ising(beta, vol.dim), psi)
    r = phi.finite_range
    ext = _plus_extended(dict(omega), phi, vol, r)
    flipped = flip_interior(ext, gamma.interior)
    h1, _ = hamiltonian(phi, vol, ext, r)
    h2, _ = hamiltonian(phi, vol, flipped, r)
    dlt = delta_term(psi, vol, omega, gamma)
    return abs(-h1 - (-2 * beta * len(gamma) + dlt - h2))


def contour_masks(volume, contours: Sequence[Contour]) -> np.ndarray:
    """Boolean (len(contours), 2^n) array: is the contour in Gamma(w) for each
    configuration of the volume (+1 outside)."""
    vol = lattice.as_site_set(volume)
    n = len(vol)
    idx = vol.index
    configs = np.arange(1 << n, dtype=np.int64)
    bits = [((configs >> (n - 1 - i)) & 1).astype(bool) for i in range(n)]
    zero = np.zeros(1 << n, dtype=bool)

    def is_boundary(edge):
        x, y = edge
        bx = bits[idx[x]] if x in idx else zero
        by = bits[idx[y]] if y in idx else zero
        return bx ^ by

    out = np.zeros((len(contours), 1 << n), dtype=bool)
    d = vol.dim
    for k, gamma in enumerate(contours):
        mask = np.ones(1 << n, dtype=bool)
        for e in gamma.plaquettes:
            mask &= is_boundary(e)
        touching = set()
        for e in gamma.plaquettes:
            for v in face_vertices(e):
                touching.update(_faces_at_vertex(v, d))
        for e in touching - gamma.plaquettes:
            if e[0] in idx or e[1] in idx:
                mask &= ~is_boundary(e)
        out[k] = mask
    return out


def _faces_at_vertex(v: Point, d: int) -> list:
    """Faces (as edges) whose closed face contains the doubled-coordinate vertex v."""
    out = []
    for i in range(d):
        # face centre c has c_i even-odd pattern: c_i = v_i, others c_j = v_j +- 1
        others = [j for j in range(d) if j != i]
        for signs in itertools.product((-1, 1), repeat=len(others)):
            c = list(v)
            for j, sg in zip(others, signs):
                c[j] = v[j] + sg
            # c = x + y with y = x + e_i, so x_i = (c_i - 1) / 2 and x_j = c_j / 2
            if (c[i] - 1) % 2 or any(c[j] % 2 for j in others):
                continue
            x = tuple((c[j] - 1) // 2 if j == i else c[j] // 2 for j in range(d))
            out.append((x, lattice.add(x, lattice.unit(d, i))))
    return out


def contours_in(volume) -> list[Contour]:
    """Every contour whose interior is a c-connected subset of the volume."""
    vol = lattice.as_site_set(volume)
    out = []
    for r in range(1, len(vol) + 1):
        for subset in itertools.combinations(vol.sites, r):
            if lattice.is_c_connected(subset):
                out.append(Contour.from_interior(subset))
    return out


@dataclass
class PeierlsReport:
    contours: list
    lhs: float
    rhs: float
    passed: bool
    tail: float = 0.0

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _peierls_preconditions(beta, psi, delta, vol, contours) -> list[str]:
    problems = _require_peierls_perturbation(psi)
    if not 0 < delta < 1:
        problems.append(f"delta={delta} must lie in (0, 1)")
    if psi.kernel is None:
        na = norm_abs(psi).hi
        if na > delta:
            problems.append(f"||psi|| = {na} exceeds delta = {delta}")
    if not lattice.is_c_connected(vol):
        problems.append("volume is not c-connected")
    for g in contours:
        if not g.interior.issubset(vol):
            problems.append("a contour interior leaves the volume")
    for a, b in itertools.combinations(contours, 2):
        if set(a.interior) & set(b.interior):
            problems.append("contour interiors are not pairwise disjoint")
    if beta <= 0:
        problems.append("beta must be positive")
    return problems


def peierls_verify(beta: float, psi: Interaction, delta: float, volume,
                   contours: Sequence[Contour]) -> PeierlsReport:
    """Exact plus-boundary probability that all ``contours`` occur, against
    ``exp(-2 (beta - delta) sum |gamma_i|)``."""
    vol = lattice.as_site_set(volume)
    problems = _peierls_preconditions(beta, psi, delta, vol, contours)
    if problems:
        raise ValueError("; ".join(problems))
    mu = build_gibbs(add(ising(beta, vol.dim), psi), vol, BoundaryCondition.plus())
    masks = contour_masks(vol, contours)
    lhs = float(np.sum(mu.probs[np.all(masks, axis=0)]))
    rhs = math.exp(-2 * (beta - delta) * sum(len(g) for g in contours))
    return PeierlsReport(list(contours), lhs, rhs, lhs <= rhs, mu.tail_bound)


def peierls_sweep(beta: float, psi: Interaction, delta: float, volume) -> dict:
    """Check every single contour and every disjoint pair inside the volume.

    Returns counts and the worst ratio lhs / rhs.
    """
    vol = lattice.as_site_set(volume)
    contours = contours_in(vol)
    problems = _peierls_preconditions(beta, psi, delta, vol, contours[:1])
    if problems:
        raise ValueError("; ".join(problems))
    mu = build_gibbs(add(ising(beta, vol.dim), psi), vol, BoundaryCondition.plus())
    masks = contour_masks(vol, contours).astype(np.float64)
    single = masks @ mu.probs
    sizes = np.array([len(g) for g in contours], dtype=np.float64)
    rate = 2 * (beta - delta)
    worst_single = float(np.max(single / np.exp(-rate * sizes)))
    pair = (masks * mu.probs) @ masks.T
    interiors = [set(g.interior) for g in contours]
    disjoint = np.array([[not (a & b) for b in interiors] for a in interiors])
    np.fill_diagonal(disjoint, False)
    bound = np.exp(-rate * (sizes[:, None] + sizes[None, :]))
    ratios = np.where(disjoint, pair / bound, 0.0)
    return {
        "contours": len(contours),
        "pairs": int(np.sum(np.triu(disjoint))),
        "worst_single_ratio": worst_single,
        "worst_pair_ratio": float(np.max(ratios)) if disjoint.any() else 0.0,
        "passed": worst_single <= 1.0 and (not disjoint.any() or float(np.max(ratios)) <= 1.0),
    }


def ising_energy_identity_gap(beta: float, volume, omega: Mapping) -> float:
    """Log-domain gap in exp(-H) = e^(beta |E_L|) prod_gamma e^(-2 beta |gamma|)."""
    vol = lattice.as_site_set(volume)
    phi = ising(beta, vol.dim)
    ext = _plus_extended(dict(omega), phi, vol, 1)
    h, _ = hamiltonian(phi, vol, ext, 1)
    edges = set()
    for x in vol.sites:
        for i in range(vol.dim):
            for sgn in (1, -1):
                edges.add(_edge(x, lattice.add(x, lattice.unit(vol.dim, i, sgn))))
    total = sum(len(g) for g in extract_contours(omega, vol))
    return abs(-h - (beta * len(edges) - 2 * beta * total))
