"""Dobrushin's uniqueness criterion.

``rho(x)`` is the largest change in the single-site conditional probability of
spin +1 at the origin when the boundary spin at ``x`` alone is changed.  It is
computed exactly by enumerating the dependence set of the origin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import lattice
from .interaction import Interaction, iter_terms, kernel_tail, norm_var, resolve_radius
from .lattice import Point

DEPENDENCE_CAP = 22
UNIQUE = "UniqueGibbs"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class DobrushinReport:
    rho_values: dict = field(default_factory=dict)
    rho_sum: float = 0.0
    rho_verdict: str = INCONCLUSIVE
    var_norm: float = 0.0
    var_verdict: str = INCONCLUSIVE
    truncation_note: float = 0.0

    def to_dict(self) -> dict:
        return {
            "rhoValues": [{"site": list(x), "rho": v} for x, v in sorted(self.rho_values.items())],
            "rhoSum": self.rho_sum,
            "rhoVerdict": self.rho_verdict,
            "varNorm": self.var_norm,
            "varVerdict": self.var_verdict,
            "truncationNote": self.truncation_note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _influences(phi: Interaction, truncation_radius: int | None):
    """Exact rho over the truncated dependence set, plus the kernel tail T."""
    o = lattice.origin(phi.dim)
    r = resolve_radius(phi, truncation_radius)
    terms = list(iter_terms(phi, [o], r))
    dep = sorted({q for delta, _ in terms for q in delta} - {o})
    k = len(dep)
    if k > DEPENDENCE_CAP:
        raise ValueError(f"dependence set has {k} sites, over the cap {DEPENDENCE_CAP}; "
                         "use the variation-norm criterion instead")
    tail = 0.0
    if phi.kernel is not None and phi.kernel.amplitude != 0:
        tail = kernel_tail(phi.kernel, phi.dim, r).hi
    if k == 0:
        return {}, tail, r
    pos = {q: i for i, q in enumerate(dep)}
    cfg = np.arange(1 << k, dtype=np.int64)
    bits = [(cfg >> (k - 1 - i)) & 1 for i in range(k)]
    # dH = H(+ at 0) - H(- at 0) for every context on the dependence set
    dh = np.zeros(1 << k)
    for delta, table in terms:
        m = len(delta)
        idx = np.zeros(1 << k, dtype=np.int64)
        zero_bit = 0
        for j, q in enumerate(delta):
            if q == o:
                zero_bit = 1 << (m - 1 - j)
            else:
                idx |= bits[pos[q]] << (m - 1 - j)
        dh += table[idx] - table[idx | zero_bit]
    p_plus = expit(-dh)
    rho = {}
    for i, q in enumerate(dep):
        diff = np.max(np.abs(p_plus - p_plus[cfg ^ (1 << (k - 1 - i))]))
        rho[q] = float(min(diff, 1.0))
    return rho, tail, r


def rho(phi: Interaction, x: Point, truncation_radius: int | None = None) -> float:
    """rho_Phi(x); an upper bound when a kernel is truncated.

    With a kernel, the neglected pairs shift the conditional's log-odds by at
    most 2T (T the kernel tail), which moves rho by at most T at sites inside
    the radius.  Beyond the radius rho(x) <= |J(x)|.
    """
    x = tuple(x)
    if x == lattice.origin(phi.dim):
        raise ValueError("rho is defined for x != 0")
    values, tail, r = _influences(phi, truncation_radius)
    if lattice.norm_inf(x) > r and phi.kernel is not None:
        return min(1.0, abs(phi.kernel.coupling(x)))
    value = values.get(x, 0.0)
    if tail and value:
        value = min(1.0, value + tail)
    return value


def dobrushin_sum(phi: Interaction, truncation_radius: int | None = None) -> DobrushinReport:
    values, tail, _ = _influences(phi, truncation_radius)
    note = len(values) * tail + tail if tail else 0.0
    total = float(sum(values.values())) + note
    nonzero = {q: v for q, v in values.items() if v > 0}
    return DobrushinReport(rho_values=nonzero, rho_sum=total,
                           rho_verdict=UNIQUE if total < 1 else INCONCLUSIVE,
                           truncation_note=note)


def var_criterion(phi: Interaction) -> DobrushinReport:
    v = norm_var(phi).hi
    return DobrushinReport(var_norm=v, var_verdict=UNIQUE if v < 2 else INCONCLUSIVE)


def full_report(phi: Interaction, truncation_radius: int | None = None) -> DobrushinReport:
    a = dobrushin_sum(phi, truncation_radius)
    b = var_criterion(phi)
    return DobrushinReport(a.rho_values, a.rho_sum, a.rho_verdict, b.var_norm,
                           b.var_verdict, a.truncation_note)


def verdict_table(report: DobrushinReport) -> str:
    lines = [f"{'criterion':<12}{'value':>24}  verdict",
             f"{'rho sum':<12}{report.rho_sum:>24.17g}  {report.rho_verdict}",
             f"{'var norm':<12}{report.var_norm:>24.17g}  {report.var_verdict}"]
    if report.truncation_note:
        lines.append(f"(rho sum includes a kernel truncation allowance of {report.truncation_note:.17g})")
    return "\n".join(lines)
