"""One test per acceptance criterion.  Each prints a PASS/FAIL line with its
runtime; the lines are repeated in the terminal summary."""

import contextlib
import math
import time

import numpy as np
import pytest

from gibbslab import contour as C
from gibbslab import dobrushin as D
from gibbslab import gibbs as G
from gibbslab import interaction as I
from gibbslab import montecarlo as M
from gibbslab import thermo as T
from gibbslab.gibbs import BoundaryCondition as BC

import oracles
from conftest import ACCEPTANCE_LINES
from fixtures import DELTA, peierls_perturbations


@contextlib.contextmanager
def criterion(number, title, budget):
    start = time.perf_counter()
    ok = False
    detail = ""
    try:
        yield
        ok = True
    except AssertionError as exc:
        detail = f" [{str(exc).splitlines()[0] if str(exc) else 'assertion failed'}]"
        raise
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < budget
        verdict = "PASS" if ok and within else "FAIL"
        timing = f"{elapsed:.2f}s of {budget:g}s budget"
        line = f"criterion {number}: {verdict} {title} ({timing}){detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        if ok:
            assert within, f"criterion {number} took {elapsed:.1f}s, over its {budget:g}s budget"


def test_criterion_01_var_norm_identity():
    with criterion(1, "normVar(ising(beta,d)) = 4 d beta", 1):
        for d in (2, 3):
            for beta in (0.1, 1.0, 2.5):
                v = I.norm_var(I.ising(beta, d))
                assert abs(v.hi - 4 * d * beta) <= 1e-12 * 4 * d * beta
                assert abs(v.lo - 4 * d * beta) <= 1e-12 * 4 * d * beta


def test_criterion_02_norm_ordering():
    with criterion(2, "norm ordering on 100 random interactions", 10):
        rng = np.random.default_rng(2)
        for _ in range(100):
            phi = I.random_interaction(rng, n_shapes=int(rng.integers(1, 5)), max_sites=4, max_diam=3,
                                       scale=float(rng.uniform(0.1, 3)))
            n = I.all_norms(phi)
            tol = 1e-12 * (1 + n["decay"].hi)
            assert n["abs"].hi <= n["decay"].hi + tol
            assert n["decay_prime"].hi <= n["decay"].hi + tol
            assert n["var"].hi <= 2 * n["decay"].hi + tol
            assert I.norm_abs(I.rectangle_transform(phi)).hi <= n["decay_prime"].hi + tol


def test_criterion_03_rectangle_equivalence():
    with criterion(3, "rectangle-hull equivalence on 10 random perturbations", 30):
        rng = np.random.default_rng(3)
        box = G.box_volume((3, 3))
        boundaries = [BC.plus(), BC.minus(), BC.explicit(1, {(-1, 1): -1, (3, 0): -1, (1, 3): -1})]
        for k in range(10):
            psi = I.random_interaction(rng, n_shapes=3, max_sites=3, max_diam=2)
            phi0 = I.ising(float(rng.uniform(0.1, 1.0)), 2)
            gap = G.gibbs_equivalence_check(phi0, psi, box, boundaries[k % 3])
            assert gap <= 1e-10


def test_criterion_04_dlr():
    with criterion(4, "DLR consistency on 10 random triples", 30):
        rng = np.random.default_rng(4)
        shapes = [(3, 3), (2, 3), (3, 2), (2, 2)]
        for k in range(10):
            phi = I.add(I.ising(float(rng.uniform(0, 1.5)), 2),
                        I.random_interaction(rng, max_diam=1))
            vol = G.box_volume(shapes[k % 4])
            delta = [p for p in vol if rng.random() < 0.4] or [vol.sites[0]]
            bc = [BC.plus(), BC.minus(), BC.explicit(-1, {(-1, 0): 1})][k % 3]
            assert G.dlr_check(phi, vol, delta, bc) <= 1e-10


def test_criterion_05_census():
    with criterion(5, "contour census n <= 12 with the C_2 bound", 60):
        census = C.contour_census(12)
        oracle = oracles.census_oracle(6)
        assert census[4] == oracle[4] == 1
        assert census[6] == oracle[6] == 4
        cd = C.compute_cd(2)
        for n, count in census.items():
            assert count <= (n + 1) * cd ** (2 * n + 1)


def test_criterion_06_perturbed_peierls():
    with criterion(6, "perturbed Peierls bound and weight identities", 300):
        fixtures = peierls_perturbations()
        assert len(fixtures) == 5
        for name, psi in fixtures.items():
            assert I.norm_abs(psi).hi <= DELTA + 1e-15
            for sides in ((3, 3), (4, 3)):
                out = C.peierls_sweep(1.0, psi, DELTA, G.box_volume(sides))
                assert out["passed"], (name, sides, out)
                assert out["contours"] > 0 and out["pairs"] > 0
        rng = np.random.default_rng(6)
        box = G.box_volume((4, 4))
        nonzero = [v for k, v in sorted(fixtures.items()) if k != "zero"]
        for _ in range(200):
            psi = nonzero[int(rng.integers(len(nonzero)))]
            minus = [p for p in box if rng.random() < 0.35] or [(1, 1)]
            omega = C.configuration(box, minus)
            family = C.extract_contours(omega, box)
            gamma = family[int(rng.integers(len(family)))]
            assert C.weight_identity_gap(1.0, psi, box, omega, gamma) <= 1e-10
            assert abs(C.delta_term(psi, box, omega, gamma)) < 2 * len(gamma) * I.norm_abs(psi).hi


def test_criterion_07_epsilon_series():
    with criterion(7, "epsilon(L) closed form, monotonicity and threshold", 1):
        cd = C.compute_cd(2)
        L_value = math.log(cd) + 2
        assert abs(C.epsilon_of_l(L_value) - oracles.epsilon_partial(L_value, cd)) < 1e-12
        values = [e for _, e in C.epsilon_grid(2)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert C.epsilon_threshold(2) == 3.42


def test_criterion_08_dobrushin():
    with criterion(8, "Dobrushin verdicts and the variation-norm implication", 60):
        low = D.full_report(I.ising(0.2, 2))
        assert low.rho_verdict == low.var_verdict == D.UNIQUE
        high = D.full_report(I.ising(2.0, 2))
        assert high.rho_verdict == high.var_verdict == D.INCONCLUSIVE
        rng = np.random.default_rng(8)
        checked = 0
        while checked < 50:
            phi = I.random_interaction(rng, n_shapes=int(rng.integers(1, 4)), max_sites=3, max_diam=1)
            v = I.norm_var(phi).hi
            if v == 0:
                continue
            phi = phi.scaled(float(rng.uniform(0.05, 1.99)) / v)
            assert I.norm_var(phi).hi < 2
            assert D.dobrushin_sum(phi).rho_sum < 1
            checked += 1


def test_criterion_09_pressure():
    with criterion(9, "chain log Z against the transfer matrix; Lipschitz bound", 60):
        for beta in (0.3, 1.0):
            for n in range(0, 13):
                rep = T.pressure_estimate(I.ising(beta, 1), n, allow_large=n > 9)
                size = 2 * n + 1
                ref = oracles.transfer_matrix_log_z(beta, size)
                assert abs(rep.log_z_per_site * size - ref) <= 1e-10
        rng = np.random.default_rng(9)
        for _ in range(25):
            phi0 = I.add(I.ising(float(rng.uniform(0, 1.5)), 2), I.random_interaction(rng, max_diam=1))
            psi = I.random_interaction(rng, max_diam=1, scale=float(rng.uniform(0.05, 1)))
            assert T.pressure_lipschitz_check(phi0, psi, 1)[2]


def test_criterion_10_mc_calibration():
    with criterion(10, "heat-bath conditionals and 2x2 stationary law", 120):
        rng = np.random.default_rng(10)
        vol = G.box_volume((3, 3))
        for _ in range(100):
            phi = I.random_interaction(rng, max_diam=1, scale=2.0)
            bc = [BC.plus(), BC.minus(), BC.explicit(1, {(-1, 1): -1})][int(rng.integers(3))]
            model = M.CompiledModel(phi, vol, bc)
            spins = np.where(rng.random(9) < 0.5, 1, -1).astype(np.int8)
            x = int(rng.integers(9))
            site = vol.sites[x]
            others = {p: int(s) for p, s in zip(vol.sites, spins) if p != site}
            exact = G.build_gibbs(phi, [site], BC.explicit(bc.base, {**bc.deviation_map, **others}),
                                  truncation_radius=1)
            assert abs(M.conditional_probability(model, spins, x) - exact.probs[0]) <= 1e-12
        phi = I.add(I.ising(0.5, 2), I.random_interaction(rng, max_diam=1, scale=0.3))
        box = M.Rectangle.box((2, 2))
        cfg = M.ChainConfig("calibration", box, BC.plus(), None, 10, 1_000_000, 1000)
        res = M.run_chain(phi, cfg, list(box.points()))
        rec = res.recorded[1000:]
        idx = ((rec < 0).astype(np.int64) * (1 << np.arange(3, -1, -1))).sum(axis=1)
        exact = G.build_gibbs(phi, box.site_set(), BC.plus()).probs
        for k in range(16):
            mean, se = M.batch_means((idx == k).astype(float), 100)
            assert abs(mean - exact[k]) <= 3 * se + 1e-12


def test_criterion_11_coexistence():
    with criterion(11, "qualitative coexistence, uniqueness and field regimes on 16x16", 600):
        seeds = [1, 2, 3, 4]
        radius = 4
        unit = I.norm_decay(I.power_law(1.0, 5.0, 2, radius)).mid
        psi = I.power_law(0.05 / unit, 5.0, 2, radius)
        assert abs(I.norm_decay(psi).mid - 0.05) < 1e-6
        assert I.is_spin_flip_symmetric(psi)
        kw = dict(sweeps=5000, burn_in=1000)
        low = M.coexistence_indicator(I.add(I.ising(1.0, 2), psi), 16, radius, seeds, **kw)
        assert low.gap > 1.5, low
        high = M.coexistence_indicator(I.add(I.ising(0.15, 2), psi.scaled(0.15)), 16, radius, seeds, **kw)
        assert abs(high.gap) <= 3 * high.se_gap, high
        with pytest.warns(UserWarning):
            field = M.coexistence_indicator(I.ising_with_field(1.0, 0.5, 2), 16, None, seeds, **kw)
        assert field.m_plus > 0 and field.m_minus > 0, field
