import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gibbslab import contour as C
from gibbslab import gibbs as G
from gibbslab import interaction as I
from gibbslab import lattice as L

import oracles
from fixtures import DELTA, peierls_perturbations

BOX4 = G.box_volume((4, 4))
# |Gamma_{n,0}| for n = 4..14, frozen from the box-subset oracle in tests/oracles.py
GOLDEN_CENSUS = {4: 1, 6: 4, 8: 26, 10: 148, 12: 908, 14: 5600}
GOLDEN_C2, GOLDEN_C3 = 6, 32
GOLDEN_EPS_THRESHOLD = 3.42

minus_sets = st.sets(st.sampled_from(list(BOX4)), max_size=10)


def cd_oracle(d):
    """Faces sharing a lattice corner with the reference face, counted by corners."""
    def corners(x, i):
        others = [j for j in range(d) if j != i]
        out = set()
        for offs in itertools.product((-1, 1), repeat=d - 1):
            c = [2 * x[k] + 1 for k in range(d)]
            for j, o in zip(others, offs):
                c[j] = 2 * x[j] + o
            out.add(tuple(c))
        return out
    ref = corners((0,) * d, 0)
    count = 0
    for x in itertools.product(range(-2, 3), repeat=d):
        for i in range(d):
            if corners(x, i) & ref:
                count += 1
    return count - 1


def test_minus_region_examples():
    assert len(C.minus_region(C.configuration(BOX4), BOX4)) == 0
    assert set(C.minus_region(C.configuration(BOX4, [(1, 1)]), BOX4)) == {(1, 1)}
    omega = C.configuration(BOX4, [(0, 0), (1, 1)])
    assert set(C.minus_region(omega, BOX4)) == {(0, 0), (1, 1)}
    with pytest.raises(ValueError):
        C.minus_region({(9, 9): -1}, BOX4)


def test_extraction_examples():
    assert C.extract_contours(C.configuration(BOX4), BOX4) == []
    (gamma,) = C.extract_contours({(0, 0): -1})
    assert len(gamma) == 4 and set(gamma.interior) == {(0, 0)}
    vol = G.box_volume((4, 1))
    two = C.extract_contours(C.configuration(vol, [(0, 0), (3, 0)]), vol)
    assert sorted(len(g) for g in two) == [4, 4]
    # diagonal neighbours share a corner, so they form one contour
    (diag,) = C.extract_contours(C.configuration(BOX4, [(0, 0), (1, 1)]), BOX4)
    assert len(diag) == 8 and set(diag.interior) == {(0, 0), (1, 1)}


def test_oriented_plaquettes():
    gamma = C.Contour.from_interior([(0, 0)])
    assert all(x == (0, 0) and L.norm1(L.sub(x, y)) == 1 for x, y in gamma.oriented())


def test_hole_gives_nested_contours():
    ring = [p for p in G.box_volume((3, 3)) if p != (1, 1)]
    contours = C.extract_contours(C.configuration(BOX4, ring), BOX4)
    assert sorted(len(g) for g in contours) == [4, 12]
    outer = max(contours, key=len)
    assert len(outer.interior) == 9


@given(minus_sets)
@settings(max_examples=80)
def test_round_trip_and_conservation(minus):
    omega = C.configuration(BOX4, minus)
    family = C.extract_contours(omega, BOX4)
    seen = set()
    for gamma in family:
        assert C.boundary_plaquettes(gamma.interior) == gamma.plaquettes
        assert L.is_c_connected(gamma.interior)
        assert len(gamma) >= 4
        assert not (seen & gamma.plaquettes)
        seen |= gamma.plaquettes
    assert seen == C.boundary_plaquettes(minus)
    assert sum(len(g) for g in family) == C.opposite_edges(minus)


@given(minus_sets, st.data())
@settings(max_examples=60)
def test_flip_removes_exactly_one_contour(minus, data):
    omega = C.configuration(BOX4, minus)
    family = C.extract_contours(omega, BOX4)
    if not family:
        return
    gamma = data.draw(st.sampled_from(family))
    flipped = C.flip(omega, gamma, BOX4)
    assert set(C.extract_contours(flipped, BOX4)) == set(family) - {gamma}
    assert C.flip_interior(flipped, gamma.interior) == omega


def test_flip_examples():
    omega = C.configuration(BOX4, [(2, 2)])
    (gamma,) = C.extract_contours(omega, BOX4)
    assert all(s == 1 for s in C.flip(omega, gamma, BOX4).values())
    with pytest.raises(ValueError):
        C.flip(C.configuration(BOX4), gamma, BOX4)


@given(minus_sets, st.floats(0.05, 3.0))
@settings(max_examples=60)
def test_ising_energy_identity(minus, beta):
    omega = C.configuration(BOX4, minus)
    assert C.ising_energy_identity_gap(beta, BOX4, omega) <= 1e-10


def test_compute_cd():
    assert C.compute_cd(2) == GOLDEN_C2 == cd_oracle(2)
    assert C.compute_cd(3) == GOLDEN_C3 == cd_oracle(3)
    for d in (2, 3):
        assert C.compute_cd(d, include_self=True) == C.compute_cd(d) + 1
    with pytest.raises(ValueError):
        C.compute_cd(1)


def test_census_matches_oracle():
    census = C.contour_census(12)
    assert census == oracles.census_oracle(12)
    assert census == {n: v for n, v in GOLDEN_CENSUS.items() if n <= 12}


def test_census_golden_and_bound():
    census = C.contour_census(14)
    assert census == GOLDEN_CENSUS
    for n, count in census.items():
        assert count <= C.census_bound(n, GOLDEN_C2)
    rows = C.census_rows(8)
    assert [r["n"] for r in rows] == [4, 6, 8]
    assert rows[0]["ratio"] == 1 / C.census_bound(4, 6)
    with pytest.raises(ValueError):
        C.contour_census(16)
    with pytest.raises(ValueError):
        C.contour_census(6, d=3)


@pytest.mark.parametrize("d", [2, 3])
def test_epsilon_closed_form(d):
    cd = C.compute_cd(d)
    L_value = math.log(cd) + 2
    assert abs(C.epsilon_of_l(L_value, d) - oracles.epsilon_partial(L_value, cd)) < 1e-12
    with pytest.raises(ValueError):
        C.epsilon_of_l(math.log(cd), d)


def test_epsilon_grid():
    grid = C.epsilon_grid(2)
    values = [e for _, e in grid]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 0.01
    assert C.epsilon_threshold(2) == GOLDEN_EPS_THRESHOLD
    assert C.epsilon_of_l(GOLDEN_EPS_THRESHOLD) < 0.5 <= C.epsilon_of_l(GOLDEN_EPS_THRESHOLD - 0.01)


def random_instance(rng, fixtures):
    name = sorted(fixtures)[int(rng.integers(len(fixtures)))]
    minus = [p for p in BOX4 if rng.random() < 0.35] or [(1, 1)]
    omega = C.configuration(BOX4, minus)
    family = C.extract_contours(omega, BOX4)
    gamma = family[int(rng.integers(len(family)))]
    return fixtures[name], omega, gamma


def test_delta_term_examples():
    omega = C.configuration(BOX4, [(1, 1), (1, 2)])
    (gamma,) = C.extract_contours(omega, BOX4)
    assert C.delta_term(I.zero(2), BOX4, omega, gamma) == 0.0
    with pytest.raises(ValueError):
        C.delta_term(I.random_interaction(np.random.default_rng(0)), BOX4, omega, gamma)
    with pytest.raises(ValueError):
        C.delta_term(I.power_law(0.01, 5, 2, 1), BOX4, omega, gamma)


def test_weight_identity_and_delta_bound():
    rng = np.random.default_rng(7)
    fixtures = {k: v for k, v in peierls_perturbations().items() if k != "zero"}
    for _ in range(200):
        psi, omega, gamma = random_instance(rng, fixtures)
        beta = float(rng.uniform(0.2, 2.0))
        assert C.weight_identity_gap(beta, psi, BOX4, omega, gamma) <= 1e-10
        dlt = C.delta_term(psi, BOX4, omega, gamma)
        assert abs(dlt) < 2 * len(gamma) * I.norm_abs(psi).hi


def test_peierls_unit_cell_plain():
    vol = G.box_volume((3, 3))
    gamma = C.Contour.from_interior([(1, 1)])
    rep = C.peierls_verify(1.0, I.zero(2), DELTA, vol, [gamma])
    assert rep.passed and rep.lhs <= math.exp(-8)
    probs, _ = oracles.brute_gibbs(I.ising(1.0, 2), vol, 1)
    expected = 0.0
    for k, spins in enumerate(itertools.product((1, -1), repeat=9)):
        omega = dict(zip(vol.sites, spins))
        if gamma in C.extract_contours(omega, vol):
            expected += probs[k]
    assert rep.lhs == pytest.approx(expected, rel=1e-12)
    assert rep.margin == pytest.approx(rep.rhs - rep.lhs)


def test_peierls_unit_cell_with_noise():
    vol = G.box_volume((3, 3))
    psi = peierls_perturbations()["nn_noise_a"]
    rep = C.peierls_verify(1.0, psi, DELTA, vol, [C.Contour.from_interior([(1, 1)])])
    assert rep.rhs == pytest.approx(math.exp(-2 * 0.9 * 4))
    assert rep.passed


def test_peierls_two_cells():
    vol = G.box_volume((4, 3))
    pair = [C.Contour.from_interior([(0, 1)]), C.Contour.from_interior([(2, 1)])]
    for psi in peierls_perturbations().values():
        rep = C.peierls_verify(1.0, psi, DELTA, vol, pair)
        assert rep.rhs == pytest.approx(math.exp(-2 * 0.9 * 8))
        assert rep.passed


def test_peierls_preconditions():
    vol = G.box_volume((3, 3))
    cell = C.Contour.from_interior([(1, 1)])
    with pytest.raises(ValueError, match="exceeds delta"):
        C.peierls_verify(1.0, I.ising(-0.05, 2), DELTA, vol, [cell])
    with pytest.raises(ValueError, match="symmetric"):
        C.peierls_verify(1.0, I.ising_with_field(0.0, 0.01, 2), DELTA, vol, [cell])
    with pytest.raises(ValueError, match="disjoint"):
        C.peierls_verify(1.0, I.zero(2), DELTA, vol, [cell, C.Contour.from_interior([(1, 1), (1, 2)])])
    with pytest.raises(ValueError):
        C.peierls_verify(1.0, I.zero(2), DELTA, vol, [C.Contour.from_interior([(5, 5)])])


@pytest.mark.parametrize("name", sorted(peierls_perturbations()))
def test_peierls_sweep_3x3(name):
    psi = peierls_perturbations()[name]
    out = C.peierls_sweep(1.0, psi, DELTA, G.box_volume((3, 3)))
    assert out["passed"]
    assert out["contours"] > 0 and out["pairs"] > 0
