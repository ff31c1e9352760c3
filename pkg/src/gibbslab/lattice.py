"""Geometry of the hypercubic lattice Z^d.

Points are plain tuples of ints.  Finite site sets are wrapped in
:class:`SiteSet`, which keeps its sites sorted in lexicographic order and
caches the diameter and bounding rectangle.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence, Tuple

Point = Tuple[int, ...]

MAX_DIMENSION = 4


def norm1(x: Sequence[int]) -> int:
    return sum(abs(c) for c in x)


def norm_inf(x: Sequence[int]) -> int:
    return max((abs(c) for c in x), default=0)


def add(x: Sequence[int], y: Sequence[int]) -> Point:
    return tuple(a + b for a, b in zip(x, y))


def sub(x: Sequence[int], y: Sequence[int]) -> Point:
    return tuple(a - b for a, b in zip(x, y))


def origin(d: int) -> Point:
    return (0,) * d


def unit(d: int, axis: int, sign: int = 1) -> Point:
    e = [0] * d
    e[axis] = sign
    return tuple(e)


@dataclass(frozen=True)
class Rectangle:
    """Integer box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``."""

    lo: Point
    hi: Point

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("rectangle corners differ in dimension")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty rectangle {self.lo}..{self.hi}")

    @classmethod
    def box(cls, sides: Sequence[int], lo: Sequence[int] | None = None) -> "Rectangle":
        lo = tuple(lo) if lo is not None else (0,) * len(sides)
        return cls(lo, tuple(a + s - 1 for a, s in zip(lo, sides)))

    @classmethod
    def centered(cls, n: int, d: int) -> "Rectangle":
        """The box B(n) = {-n, ..., n}^d."""
        return cls((-n,) * d, (n,) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> Point:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        out = 1
        for s in self.sides:
            out *= s
        return out

    def __contains__(self, x) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, x, self.hi))

    def points(self) -> Iterator[Point]:
        # itertools.product over ascending ranges yields lexicographic order
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi)))

    def site_set(self) -> "SiteSet":
        return SiteSet(self.points())

    def enlarged(self, margin: int) -> "Rectangle":
        return Rectangle(tuple(a - margin for a in self.lo), tuple(b + margin for b in self.hi))

    def translate(self, a: Sequence[int]) -> "Rectangle":
        return Rectangle(add(self.lo, a), add(self.hi, a))


class SiteSet:
    """Finite subset of Z^d with sites stored in lexicographic order."""

    def __init__(self, sites: Iterable[Sequence[int]] = ()):
        pts = sorted({tuple(int(c) for c in p) for p in sites})
        if pts:
            d = len(pts[0])
            if any(len(p) != d for p in pts):
                raise ValueError("mixed dimensions in site set")
            if d < 1 or d > MAX_DIMENSION:
                raise ValueError(f"dimension {d} outside 1..{MAX_DIMENSION}")
        self.sites: Tuple[Point, ...] = tuple(pts)

    @property
    def index(self) -> dict:
        """Map from site to its position in lexicographic order."""
        try:
            return self._index
        except AttributeError:
            self._index = {p: i for i, p in enumerate(self.sites)}
            return self._index

    @property
    def dim(self) -> int:
        if not self.sites:
            raise ValueError("empty site set has no dimension")
        return len(self.sites[0])

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.sites)

    def __contains__(self, x) -> bool:
        return tuple(x) in self.index

    def __eq__(self, other) -> bool:
        if isinstance(other, SiteSet):
            return self.sites == other.sites
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.sites)

    def __repr__(self) -> str:
        return f"SiteSet({list(self.sites)!r})"

    @cached_property
    def diameter(self) -> int:
        if not self.sites:
            raise ValueError("diameter of an empty set")
        hull = self.hull
        return max(hull.sides) - 1

    @cached_property
    def hull(self) -> Rectangle:
        if not self.sites:
            raise ValueError("hull of an empty set")
        cols = list(zip(*self.sites))
        return Rectangle(tuple(min(c) for c in cols), tuple(max(c) for c in cols))

    def translate(self, a: Sequence[int]) -> "SiteSet":
        return SiteSet(add(p, a) for p in self.sites)

    def union(self, other: Iterable[Sequence[int]]) -> "SiteSet":
        return SiteSet(itertools.chain(self.sites, other))

    def difference(self, other: Iterable[Sequence[int]]) -> "SiteSet":
        drop = {tuple(p) for p in other}
        return SiteSet(p for p in self.sites if p not in drop)

    def issubset(self, other: Iterable[Sequence[int]]) -> bool:
        other = other if isinstance(other, SiteSet) else SiteSet(other)
        return all(p in other for p in self.sites)


def as_site_set(sites) -> SiteSet:
    if isinstance(sites, SiteSet):
        return sites
    if isinstance(sites, Rectangle):
        return sites.site_set()
    return SiteSet(sites)


def diameter(sites) -> int:
    """Largest sup-norm distance between two sites."""
    s = as_site_set(sites)
    if not len(s):
        raise ValueError("diameter of an empty set")
    return s.diameter


def rectangle_hull(sites) -> Rectangle:
    s = as_site_set(sites)
    if not len(s):
        raise ValueError("hull of an empty set")
    return s.hull


def middle_element(sites) -> Point:
    """The floor((|L|+1)/2)-th site of L in lexicographic order (1-based)."""
    s = as_site_set(sites)
    if not len(s):
        raise ValueError("middle element of an empty set")
    return s.sites[(len(s) + 1) // 2 - 1]


def canonical_anchor(sites) -> tuple[SiteSet, Point]:
    """Translate ``sites`` so that its middle element is the origin.

    Returns the translated set and the shift that was removed.
    """
    s = as_site_set(sites)
    m = middle_element(s)
    return s.translate(tuple(-c for c in m)), m


def _neighbour_offsets(d: int, kind: str) -> list[Point]:
    if kind == "l1":
        return [unit(d, i, sgn) for i in range(d) for sgn in (1, -1)]
    return [v for v in itertools.product((-1, 0, 1), repeat=d) if any(v)]


def _connected(points: set, offsets) -> bool:
    if not points:
        return True
    start = next(iter(points))
    seen = {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        for v in offsets:
            q = add(p, v)
            if q in points and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == len(points)


def is_l1_connected(sites) -> bool:
    s = as_site_set(sites)
    if not len(s):
        raise ValueError("connectivity of an empty set")
    return _connected(set(s.sites), _neighbour_offsets(s.dim, "l1"))


def is_linf_connected(sites) -> bool:
    s = as_site_set(sites)
    if not len(s):
        raise ValueError("connectivity of an empty set")
    return _connected(set(s.sites), _neighbour_offsets(s.dim, "linf"))


def is_c_connected(sites) -> bool:
    """True iff the set and its complement in Z^d are both sup-norm connected.

    The complement is flood filled inside the hull enlarged by one; every
    complement cell there must reach the enlarged frontier.
    """
    s = as_site_set(sites)
    if not len(s):
        raise ValueError("connectivity of an empty set")
    offsets = _neighbour_offsets(s.dim, "linf")
    inside = set(s.sites)
    if not _connected(inside, offsets):
        return False
    box = s.hull.enlarged(1)
    outside = {p for p in box.points() if p not in inside}
    frontier = [p for p in outside if any(c in (a, b) for c, a, b in zip(p, box.lo, box.hi))]
    seen = set(frontier)
    queue = deque(frontier)
    while queue:
        p = queue.popleft()
        for v in offsets:
            q = add(p, v)
            if q in outside and q not in seen:
                seen.add(q)
                queue.append(q)
    return len(seen) == len(outside)
