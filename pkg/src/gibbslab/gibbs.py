"""Exact finite-volume Gibbs states by enumeration.

Configurations of a volume are binary counters over its lexicographically
sorted sites (first site = most significant bit, bit 1 = spin -1), the same
convention used for interaction tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import logsumexp

from . import _kernels, lattice
from .interaction import (Interaction, add, config_spins, iter_terms, kernel_tail,
                          rectangle_transform, resolve_radius)
from .lattice import Point, SiteSet

DEFAULT_CAP = 20
HARD_CAP = 24
STREAM_HARD_CAP = 26
CHUNK_BITS = 20


@dataclass(frozen=True)
class BoundaryCondition:
    """Spins outside the volume.

    ``kind`` is one of plus, minus, free, explicit.  Explicit conditions are a
    constant ``base`` spin with finitely many ``deviations``.  Free drops every
    shape not contained in the volume.
    """

    kind: str
    base: int = 1
    deviations: tuple = ()

    def __post_init__(self):
        if self.kind not in ("plus", "minus", "free", "explicit"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        base = {"plus": 1, "minus": -1}.get(self.kind, self.base)
        if base not in (1, -1):
            raise ValueError("boundary base spin must be +1 or -1")
        devs = dict(self.deviations.items() if isinstance(self.deviations, Mapping) else self.deviations)
        for p, s in devs.items():
            if s not in (1, -1):
                raise ValueError(f"boundary spin at {p} must be +1 or -1")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "deviations", tuple(sorted((tuple(p), int(s)) for p, s in devs.items())))

    @classmethod
    def plus(cls) -> "BoundaryCondition":
        return cls("plus")

    @classmethod
    def minus(cls) -> "BoundaryCondition":
        return cls("minus")

    @classmethod
    def free(cls) -> "BoundaryCondition":
        return cls("free")

    @classmethod
    def explicit(cls, base: int, deviations: Mapping | None = None) -> "BoundaryCondition":
        return cls("explicit", base, tuple((deviations or {}).items()))

    @property
    def deviation_map(self) -> dict:
        return dict(self.deviations)

    def spin(self, x: Point) -> int:
        return self.deviation_map.get(tuple(x), self.base)

    def flipped(self) -> "BoundaryCondition":
        if self.kind == "plus":
            return BoundaryCondition.minus()
        if self.kind == "minus":
            return BoundaryCondition.plus()
        if self.kind == "free":
            return self
        return BoundaryCondition.explicit(-self.base, {p: -s for p, s in self.deviations})

    def describe(self) -> str:
        if self.kind != "explicit":
            return self.kind
        devs = ";".join(f"{','.join(map(str, p))}:{s:+d}" for p, s in self.deviations)
        return f"explicit(base={self.base:+d}{'; ' + devs if devs else ''})"


def _check_cap(n: int, allow_large: bool, hard: int = HARD_CAP):
    cap = hard if allow_large else DEFAULT_CAP
    if n > cap:
        hint = "" if allow_large else " (pass allow_large=True to raise the cap)"
        raise ValueError(f"volume of {n} sites exceeds enumeration cap {cap}{hint}")


class EnergyModel:
    """Hamiltonian of a volume under a boundary condition, compiled into
    per-site-group lookup tables for vectorized evaluation."""

    def __init__(self, phi: Interaction, volume, bc: BoundaryCondition,
                 truncation_radius: int | None = None):
        self.volume = lattice.as_site_set(volume)
        if not len(self.volume):
            raise ValueError("empty volume")
        self.bc = bc
        self.truncation_radius = resolve_radius(phi, truncation_radius)
        devs = bc.deviation_map
        clash = [p for p in devs if p in self.volume]
        if clash:
            raise ValueError(f"boundary deviations inside the volume: {clash[:3]}")
        idx = self.volume.index
        groups: dict[tuple, np.ndarray] = {}
        for delta, table in iter_terms(phi, self.volume, self.truncation_radius,
                                       inside_only=bc.kind == "free"):
            inner = [j for j, q in enumerate(delta) if q in idx]
            m, k = len(delta), len(inner)
            full = np.zeros(1 << k, dtype=np.int64)
            c = np.arange(1 << k, dtype=np.int64)
            pos = 0
            for j, q in enumerate(delta):
                if q in idx:
                    bit = (c >> (k - 1 - pos)) & 1
                    pos += 1
                else:
                    bit = 1 if bc.spin(q) < 0 else 0
                full |= bit << (m - 1 - j)
            key = tuple(idx[delta[j]] for j in inner)
            sub = table[full]
            groups[key] = groups[key] + sub if key in groups else sub
        self.groups = list(groups.items())
        self._key_ptr = np.cumsum([0] + [len(k) for k, _ in self.groups]).astype(np.int64)
        self._key_pos = np.array([p for k, _ in self.groups for p in k], dtype=np.int64)
        self._sub_ptr = np.cumsum([0] + [len(t) for _, t in self.groups]).astype(np.int64)
        self._subs = (np.concatenate([t for _, t in self.groups]) if self.groups
                      else np.zeros(0))
        self.tail_bound = 0.0
        if phi.kernel is not None and phi.kernel.amplitude != 0:
            self.tail_bound = len(self.volume) * kernel_tail(
                phi.kernel, phi.dim, self.truncation_radius).hi

    @property
    def n(self) -> int:
        return len(self.volume)

    def energies(self, configs: np.ndarray) -> np.ndarray:
        configs = np.ascontiguousarray(configs, dtype=np.int64)
        return _kernels.energies(configs.reshape(-1), self.n, self._key_ptr, self._key_pos,
                                 self._sub_ptr, self._subs).reshape(configs.shape)

    def energy(self, spins) -> float:
        """Energy of one configuration given as spins in volume order."""
        c = 0
        for s in spins:
            c = (c << 1) | (1 if s < 0 else 0)
        return float(self.energies(np.array([c]))[0])


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability table over {+1,-1}^sites in binary-counter order."""

    sites: SiteSet
    probs: np.ndarray

    def tensor(self) -> np.ndarray:
        return self.probs.reshape((2,) * len(self.sites))


@dataclass(frozen=True, eq=False)
class FiniteGibbsState:
    volume: SiteSet
    boundary: BoundaryCondition
    log_weights: np.ndarray
    log_z: float
    truncation_radius: int
    tail_bound: float = 0.0
    probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        probs = np.exp(self.log_weights - self.log_z)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def sites(self) -> SiteSet:
        return self.volume

    @property
    def n(self) -> int:
        return len(self.volume)

    def spins(self) -> np.ndarray:
        return config_spins(self.n)

    def distribution(self) -> Distribution:
        return Distribution(self.volume, self.probs)


def build_gibbs(phi: Interaction, volume, bc: BoundaryCondition,
                truncation_radius: int | None = None, allow_large: bool = False) -> FiniteGibbsState:
    """Enumerate all configurations of ``volume`` and normalize in the log domain."""
    model = EnergyModel(phi, volume, bc, truncation_radius)
    _check_cap(model.n, allow_large)
    log_w = -model.energies(np.arange(1 << model.n, dtype=np.int64))
    log_z = float(logsumexp(log_w))
    return FiniteGibbsState(model.volume, bc, log_w, log_z, model.truncation_radius,
                            model.tail_bound)


def log_partition(phi: Interaction, volume, bc: BoundaryCondition,
                  truncation_radius: int | None = None, allow_large: bool = False) -> tuple[float, float]:
    """``log Z`` streamed over configuration chunks; returns (logZ, tailBound)."""
    model = EnergyModel(phi, volume, bc, truncation_radius)
    _check_cap(model.n, allow_large, STREAM_HARD_CAP)
    total = 1 << model.n
    step = 1 << CHUNK_BITS
    acc = -np.inf
    for start in range(0, total, step):
        chunk = np.arange(start, min(start + step, total), dtype=np.int64)
        acc = np.logaddexp(acc, logsumexp(-model.energies(chunk)))
    return float(acc), model.tail_bound


def probability(state: FiniteGibbsState, event) -> float:
    """Probability of ``event``: a boolean mask over configurations or a
    predicate taking the (2^n, n) spin array and returning such a mask."""
    mask = event(state.spins()) if callable(event) else np.asarray(event)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != state.probs.shape:
        raise ValueError("event mask does not match the configuration space")
    return float(np.sum(state.probs[mask]))


def site_magnetization(state: FiniteGibbsState, x: Point) -> float:
    x = tuple(x)
    if x not in state.volume:
        raise ValueError(f"site {x} not in the volume")
    i = state.volume.index[x]
    t = state.probs.reshape((2,) * state.n)
    p = np.moveaxis(t, i, 0).reshape(2, -1).sum(axis=1)
    return float(p[0] - p[1])


def marginal(mu, delta) -> Distribution:
    """Push-forward of a state (or distribution) onto the sub-volume ``delta``."""
    dist = mu.distribution() if isinstance(mu, FiniteGibbsState) else mu
    delta = lattice.as_site_set(delta)
    if not delta.issubset(dist.sites):
        raise ValueError("marginal volume is not contained in the state volume")
    keep = [dist.sites.index[p] for p in delta.sites]
    drop = tuple(i for i in range(len(dist.sites)) if i not in keep)
    t = dist.tensor().sum(axis=drop) if drop else dist.tensor()
    return Distribution(delta, np.ascontiguousarray(t).reshape(-1))


def conditional_table(state: FiniteGibbsState, delta) -> tuple[SiteSet, np.ndarray]:
    """Rows: configurations of the volume minus ``delta``; columns: of ``delta``.

    Each row is the conditional distribution on ``delta`` given that row's
    outside configuration.
    """
    delta = lattice.as_site_set(delta)
    inner = [state.volume.index[p] for p in delta.sites]
    rest = [i for i in range(state.n) if i not in inner]
    t = state.probs.reshape((2,) * state.n).transpose(rest + inner)
    mat = t.reshape(1 << len(rest), 1 << len(inner))
    cond = mat / mat.sum(axis=1, keepdims=True)
    return SiteSet(state.volume.sites[i] for i in rest), cond


def dlr_check(phi: Interaction, volume, delta, bc: BoundaryCondition,
              truncation_radius: int | None = None) -> float:
    """Largest gap between the conditionals of the volume state on ``delta`` and
    the Gibbs states of ``delta`` with the conditioning spins as boundary."""
    if bc.kind == "free":
        raise ValueError("DLR check needs a plus, minus or explicit boundary")
    vol = lattice.as_site_set(volume)
    delta = lattice.as_site_set(delta)
    if not delta.issubset(vol) or not len(delta):
        raise ValueError("delta must be a nonempty subset of the volume")
    mu = build_gibbs(phi, vol, bc, truncation_radius)
    rest, cond = conditional_table(mu, delta)
    worst = 0.0
    base_devs = bc.deviation_map
    for row, sigma in enumerate(config_spins(len(rest))):
        devs = dict(base_devs)
        devs.update(zip(rest.sites, (int(s) for s in sigma)))
        local = build_gibbs(phi, delta, BoundaryCondition.explicit(bc.base, devs),
                            mu.truncation_radius)
        worst = max(worst, float(np.max(np.abs(local.probs - cond[row]))))
    return worst


def gibbs_equivalence_check(phi0: Interaction, psi: Interaction, volume, bc: BoundaryCondition,
                            truncation_radius: int | None = None) -> float:
    """Largest pointwise gap between the states of ``phi0 + psi`` and of
    ``phi0 + rectangle_transform(psi)``."""
    if psi.kernel is not None:
        raise ValueError("perturbation must have finite support")
    tilde = rectangle_transform(psi)
    a = build_gibbs(add(phi0, psi), volume, bc, truncation_radius)
    b = build_gibbs(add(phi0, tilde), volume, bc, truncation_radius)
    return float(np.max(np.abs(a.probs - b.probs)))


def bitstrings(n: int) -> list[str]:
    return [format(c, f"0{n}b") if n else "" for c in range(1 << n)]


def write_csv(state: FiniteGibbsState, fh) -> None:
    """Dump (configuration bitstring, logWeight, probability) rows."""
    sites = " ".join("(" + ",".join(map(str, p)) + ")" for p in state.volume.sites)
    fh.write(f"# volume={sites}\n")
    fh.write(f"# boundary={state.boundary.describe()}\n")
    fh.write(f"# truncationRadius={state.truncation_radius}\n")
    fh.write(f"# tailBound={state.tail_bound:.17g}\n")
    fh.write(f"# logZ={state.log_z:.17g}\n")
    fh.write("configuration,logWeight,probability\n")
    for b, lw, p in zip(bitstrings(state.n), state.log_weights, state.probs):
        fh.write(f"{b},{lw:.17g},{p:.17g}\n")


def box_volume(sides, lo=None) -> SiteSet:
    return lattice.Rectangle.box(sides, lo).site_set()


def all_configurations(sites) -> itertools.product:
    return itertools.product((1, -1), repeat=len(lattice.as_site_set(sites)))
