"""Entropy, pressure and the variational functional on product measures.

Finite-volume pressures use free boundary conditions on the centered boxes
B(n).  Witness measures for the variational functional are i.i.d. spins.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import lattice
from .gibbs import BoundaryCondition, Distribution, log_partition
from .interaction import Interaction, add, config_spins, dumps, kernel_tail, norm_abs, resolve_radius


@dataclass(frozen=True)
class ProductMeasure:
    p: float  # probability of +1

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p={self.p} outside [0, 1]")

    @property
    def mean(self) -> float:
        return 2 * self.p - 1

    def marginal(self, sites) -> Distribution:
        s = lattice.as_site_set(sites)
        spins = config_spins(len(s))
        n_plus = np.sum(spins > 0, axis=1)
        probs = self.p ** n_plus * (1 - self.p) ** (len(s) - n_plus)
        return Distribution(s, probs)


def _xlogx(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy_rate(mu: ProductMeasure) -> float:
    return float(-_xlogx(mu.p) - _xlogx(1 - mu.p))


def entropy_estimate(dist: Distribution) -> float:
    """Per-site Shannon entropy of a distribution on {+1,-1}^sites."""
    probs = np.asarray(dist.probs, dtype=float)
    if not math.isclose(float(probs.sum()), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("distribution is not normalized")
    return float(-np.sum(_xlogx(probs)) / len(dist.sites))


def interaction_id(phi: Interaction) -> str:
    return hashlib.sha256(dumps(phi).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PressureReport:
    n: int
    log_z_per_site: float
    interaction_id: str
    boundary: str
    tail_per_site: float


def pressure_estimate(phi: Interaction, n: int, truncation_radius: int | None = None,
                      allow_large: bool = False) -> PressureReport:
    """(1/|B(n)|) log Z with free boundary condition on B(n)."""
    box = lattice.Rectangle.centered(n, phi.dim).site_set()
    log_z, tail = log_partition(phi, box, BoundaryCondition.free(), truncation_radius,
                                allow_large=allow_large)
    size = len(box)
    return PressureReport(n, log_z / size, interaction_id(phi), "free", tail / size)


def a_phi_integral_product(phi: Interaction, mu: ProductMeasure,
                           truncation_radius: int | None = None) -> tuple[float, float]:
    """Integral of A_Phi against i.i.d. spins; returns (value, tail bound)."""
    value = 0.0
    for shape, lf in phi.local.items():
        value -= float(mu.marginal(shape).probs @ lf.table)
    tail = 0.0
    k = phi.kernel
    if k is not None and k.amplitude != 0:
        r = resolve_radius(phi, truncation_radius)
        o = lattice.origin(phi.dim)
        m2 = mu.mean ** 2
        for v in np.ndindex(*(2 * r + 1,) * phi.dim):
            v = tuple(int(c) - r for c in v)
            if v > o:
                value += k.coupling(v) * m2
        tail = kernel_tail(k, phi.dim, r).hi / 2 * m2
    return value, tail


@dataclass(frozen=True)
class VariationalReport:
    p: float
    F: float
    Pn: float
    slack: float  # kernel tail allowances on both sides

    @property
    def gap(self) -> float:
        return self.Pn - self.F


def variational_gap(phi: Interaction, mu: ProductMeasure, n: int,
                    truncation_radius: int | None = None, allow_large: bool = False) -> VariationalReport:
    """F(mu) = h(mu) + int A_Phi dmu next to the pressure on B(n).

    No inequality is asserted between the two at finite n.
    """
    a, a_tail = a_phi_integral_product(phi, mu, truncation_radius)
    pr = pressure_estimate(phi, n, truncation_radius, allow_large)
    return VariationalReport(mu.p, entropy_rate(mu) + a, pr.log_z_per_site,
                             a_tail + pr.tail_per_site)


def pressure_lipschitz_check(phi0: Interaction, psi: Interaction, n: int,
                             truncation_radius: int | None = None,
                             allow_large: bool = False) -> tuple[float, float, bool]:
    """|log Z(phi0 + psi) - log Z(phi0)| / |B(n)| against ||psi||."""
    if psi.kernel is not None:
        raise ValueError("perturbation must have finite support")
    a = pressure_estimate(phi0, n, truncation_radius, allow_large)
    b = pressure_estimate(add(phi0, psi), n, truncation_radius, allow_large)
    delta = abs(b.log_z_per_site - a.log_z_per_site)
    bound = norm_abs(psi).hi
    return delta, bound, delta <= bound + 1e-12


def write_pressure_csv(reports, fh) -> None:
    fh.write("n,perSiteLogZ,tailBound\n")
    for r in reports:
        fh.write(f"{r.n},{r.log_z_per_site:.17g},{r.tail_per_site:.17g}\n")


def write_variational_csv(reports, fh) -> None:
    fh.write("p,F,Pn\n")
    for r in reports:
        fh.write(f"{r.p:.17g},{r.F:.17g},{r.Pn:.17g}\n")
