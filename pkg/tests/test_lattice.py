import itertools

import pytest
from hypothesis import given, strategies as st

from gibbslab import lattice as L
from gibbslab.lattice import Rectangle, SiteSet


@pytest.mark.parametrize("x,n1,ninf", [((0, 0), 0, 0), ((1, -2), 3, 2), ((3, 4, -5), 12, 5)])
def test_norms(x, n1, ninf):
    assert L.norm1(x) == n1
    assert L.norm_inf(x) == ninf


@pytest.mark.parametrize("sites,diam", [
    ([(0, 0)], 0), ([(0, 0), (2, 1)], 2), ([(0, 0), (1, 1), (3, 0)], 3)])
def test_diameter(sites, diam):
    assert L.diameter(sites) == diam


def test_diameter_empty_raises():
    with pytest.raises(ValueError):
        L.diameter([])


@pytest.mark.parametrize("sites,expected", [
    ([(0, 0), (1, 0)], True), ([(0, 0), (1, 1)], False), ([(0, 0), (1, 0), (1, 1)], True)])
def test_l1_connected(sites, expected):
    assert L.is_l1_connected(sites) is expected


RING = [p for p in itertools.product(range(3), repeat=2) if p != (1, 1)]


@pytest.mark.parametrize("sites,expected", [
    ([(0, 0)], True), ([(0, 0), (1, 1)], True), (RING, False), ([(0, 0), (2, 0)], False)])
def test_c_connected(sites, expected):
    assert L.is_c_connected(sites) is expected


def test_c_connected_3d_hollow_cube():
    shell = [p for p in itertools.product(range(3), repeat=3) if p != (1, 1, 1)]
    assert not L.is_c_connected(shell)
    assert L.is_c_connected(shell + [(1, 1, 1)])


@pytest.mark.parametrize("sites,lo,hi", [
    ([(0, 0)], (0, 0), (0, 0)), ([(0, 0), (2, 1)], (0, 0), (2, 1)),
    ([(0, 0), (1, 3), (-1, 1)], (-1, 0), (1, 3))])
def test_rectangle_hull(sites, lo, hi):
    assert L.rectangle_hull(sites) == Rectangle(lo, hi)


@pytest.mark.parametrize("sites,mid", [
    ([(0, 0)], (0, 0)), ([(0, 0), (1, 0)], (0, 0)), ([(-1, 0), (0, 0), (2, 5)], (0, 0))])
def test_middle_element(sites, mid):
    assert L.middle_element(sites) == mid


def test_canonical_anchor_examples():
    assert L.canonical_anchor([(5, 5)]) == (SiteSet([(0, 0)]), (5, 5))
    assert L.canonical_anchor([(1, 0), (2, 0)]) == (SiteSet([(0, 0), (1, 0)]), (1, 0))
    anchored, _ = L.canonical_anchor([(3, 1), (4, 7), (-2, 2)])
    assert L.canonical_anchor(anchored)[1] == (0, 0)


def test_rectangle_size_and_order():
    r = Rectangle.box((2, 3), (1, -1))
    pts = list(r.points())
    assert len(pts) == r.size == 6
    assert pts == sorted(pts)
    assert Rectangle.centered(2, 2).size == 25
    with pytest.raises(ValueError):
        Rectangle((1,), (0,))


def test_site_set_rejects_bad_input():
    with pytest.raises(ValueError):
        SiteSet([(0, 0), (1,)])
    with pytest.raises(ValueError):
        SiteSet([(0,) * 5])


coords = st.integers(-3, 3)
point2 = st.tuples(coords, coords)
sets2 = st.lists(point2, min_size=1, max_size=7)
shift2 = st.tuples(st.integers(-10, 10), st.integers(-10, 10))


@given(sets2, shift2, shift2)
def test_translate_composes(sites, a, b):
    s = SiteSet(sites)
    assert s.translate(b).translate(a) == s.translate(L.add(a, b))


@given(sets2)
def test_hull_preserves_diameter(sites):
    s = SiteSet(sites)
    hull = L.rectangle_hull(s)
    assert L.diameter(hull.site_set()) == L.diameter(s)
    assert all(p in hull for p in s)


@given(sets2, shift2)
def test_anchor_translation_invariant(sites, a):
    assert L.canonical_anchor(sites)[0] == L.canonical_anchor(SiteSet(sites).translate(a))[0]
    assert L.middle_element(L.canonical_anchor(sites)[0]) == (0, 0)


@given(sets2, shift2)
def test_c_connected_invariances(sites, a):
    base = L.is_c_connected(sites)
    assert L.is_c_connected(SiteSet(sites).translate(a)) == base
    assert L.is_c_connected([(y, x) for x, y in sites]) == base


@given(sets2)
def test_l1_implies_linf(sites):
    if L.is_l1_connected(sites):
        assert L.is_linf_connected(sites)


@given(sets2)
def test_cached_values_match_recomputation(sites):
    s = SiteSet(sites)
    _ = s.diameter, s.hull
    brute = max(L.norm_inf(L.sub(x, y)) for x in s for y in s)
    assert s.diameter == brute
