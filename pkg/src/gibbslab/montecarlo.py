"""Seeded heat-bath (Glauber) sampler for finite volumes with fixed boundary.

Every term table is expanded into spin products (Walsh coefficients).  Spins
outside the volume are fixed by the boundary condition, so they are folded
into the coefficients and the chain only sees products of interior spins.
The local field at x is ``g_x = sum_{S containing x} c_S prod_{S - x} w``,
giving ``H(+) - H(-) = 2 g_x`` and ``P(+) = 1 / (1 + exp(2 g_x))``.

Uniform draws come from numpy's PCG64 seeded with the chain seed; one row of
``n_sites`` uniforms is consumed per sweep in lexicographic site order.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import _kernels, lattice
from .gibbs import BoundaryCondition
from .interaction import Interaction, is_spin_flip_symmetric, iter_terms, kernel_tail, resolve_radius
from .lattice import Point, Rectangle

RNG_ALGORITHM = "numpy.random.PCG64"
MIN_BATCHES = 20
_CHUNK = 4096


def walsh_coefficients(table: np.ndarray) -> np.ndarray:
    """Coefficients c_S with f(w) = sum_S c_S prod_{i in S} w_i.

    Index S uses the same bit order as the table; bit set means i in S.
    """
    t = np.asarray(table, dtype=float).copy()
    m = t.size.bit_length() - 1
    # fast Walsh-Hadamard transform; the +1 spin is bit 0, so H = [[1,1],[1,-1]]
    h = 1
    while h < t.size:
        t = t.reshape(-1, 2, h)
        t = np.stack([t[:, 0] + t[:, 1], t[:, 0] - t[:, 1]], axis=1).reshape(-1)
        h *= 2
    return t / (1 << m)


class CompiledModel:
    """Spin-product expansion of a Hamiltonian on a volume with fixed boundary."""

    def __init__(self, phi: Interaction, volume, bc: BoundaryCondition,
                 truncation_radius: int | None = None, drop_tol: float = 1e-15):
        self.volume = lattice.as_site_set(volume)
        self.bc = bc
        self.radius = resolve_radius(phi, truncation_radius)
        idx = self.volume.index
        terms: dict[tuple, float] = {}
        for delta, table in iter_terms(phi, self.volume, self.radius, inside_only=bc.kind == "free"):
            coefs = walsh_coefficients(table)
            m = len(delta)
            for s_bits, c in enumerate(coefs):
                if c == 0.0:
                    continue
                key = []
                for j, q in enumerate(delta):
                    if s_bits >> (m - 1 - j) & 1:
                        if q in idx:
                            key.append(idx[q])
                        else:
                            c *= bc.spin(q)
                key = tuple(sorted(key))
                terms[key] = terms.get(key, 0.0) + c
        scale = max((abs(c) for c in terms.values()), default=0.0)
        self.terms = {k: c for k, c in sorted(terms.items())
                      if abs(c) > drop_tol * max(scale, 1.0) or not k}
        n = len(self.volume)
        per_site = [[] for _ in range(n)]
        for key, c in self.terms.items():
            for x in key:
                per_site[x].append((c, [y for y in key if y != x]))
        self.term_ptr = np.cumsum([0] + [len(p) for p in per_site]).astype(np.int64)
        self.coefs = np.array([c for p in per_site for c, _ in p], dtype=float)
        nbs = [nb for p in per_site for _, nb in p]
        self.nb_ptr = np.cumsum([0] + [len(nb) for nb in nbs]).astype(np.int64)
        self.nb_idx = np.array([y for nb in nbs for y in nb], dtype=np.int64)
        keys = list(self.terms)
        self.all_ptr = np.cumsum([0] + [len(k) for k in keys]).astype(np.int64)
        self.all_coefs = np.array([self.terms[k] for k in keys], dtype=float)
        self.all_idx = np.array([y for k in keys for y in k], dtype=np.int64)
        self.tail_bound = 0.0
        if phi.kernel is not None and phi.kernel.amplitude != 0:
            self.tail_bound = n * kernel_tail(phi.kernel, phi.dim, self.radius).hi

    @property
    def n(self) -> int:
        return len(self.volume)

    def local_field(self, spins: np.ndarray, x: int) -> float:
        return float(_kernels.local_field(spins, x, self.term_ptr, self.coefs,
                                          self.nb_ptr, self.nb_idx))

    def energy(self, spins: np.ndarray) -> float:
        return float(sum(c * np.prod(spins[list(k)]) for k, c in self.terms.items()))


def conditional_probability(model: CompiledModel, spins: np.ndarray, x: int) -> float:
    """P(w_x = +1 | all other spins and the boundary)."""
    g = model.local_field(np.asarray(spins, dtype=np.int8), x)
    return float(1.0 / (1.0 + np.exp(2.0 * g)))


def glauber_step(model: CompiledModel, spins: np.ndarray, site, rng: np.random.Generator) -> np.ndarray:
    """Resample one spin from its exact conditional; ``site`` is a point or index."""
    x = model.volume.index[tuple(site)] if not isinstance(site, (int, np.integer)) else int(site)
    out = np.array(spins, dtype=np.int8)
    out[x] = 1 if rng.random() < conditional_probability(model, out, x) else -1
    return out


@dataclass(frozen=True)
class ChainConfig:
    interaction_id: str
    volume: Rectangle
    boundary: BoundaryCondition
    truncation_radius: int | None
    seed: int
    sweeps: int
    burn_in: int
    thinning: int = 1
    initial: str = "boundary"  # boundary | plus | minus | random
    mirror_uniforms: bool = False  # use 1 - u: the spin-flip coupling
    stream: int = 0  # independent substream of the same seed

    def __post_init__(self):
        if not 0 <= self.burn_in < self.sweeps:
            raise ValueError("burn-in must be smaller than the number of sweeps")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.initial not in ("boundary", "plus", "minus", "random"):
            raise ValueError(f"unknown initial state {self.initial!r}")

    def to_dict(self) -> dict:
        return {
            "interactionId": self.interaction_id,
            "volume": {"lo": list(self.volume.lo), "hi": list(self.volume.hi)},
            "boundary": self.boundary.describe(),
            "truncationRadius": self.truncation_radius,
            "seed": self.seed,
            "sweeps": self.sweeps,
            "burnIn": self.burn_in,
            "thinning": self.thinning,
            "initial": self.initial,
            "mirrorUniforms": self.mirror_uniforms,
            "stream": self.stream,
        }


@dataclass
class ChainResult:
    config: ChainConfig
    energy: np.ndarray  # per site, one entry per sweep
    magnetization: np.ndarray
    recorded: np.ndarray  # (sweeps, len(record_sites)) int8
    record_sites: list
    final: np.ndarray
    tail_bound: float


def chain_rng(config: ChainConfig) -> np.random.Generator:
    ss = np.random.SeedSequence(config.seed, spawn_key=(config.stream,) if config.stream else ())
    return np.random.Generator(np.random.PCG64(ss))


def initial_state(config: ChainConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    if config.initial == "random":
        return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
    if config.initial == "boundary":
        s = config.boundary.base if config.boundary.kind != "free" else 1
    else:
        s = 1 if config.initial == "plus" else -1
    return np.full(n, s, dtype=np.int8)


def run_chain(phi: Interaction, config: ChainConfig, record_sites: Sequence[Point] = (),
              model: CompiledModel | None = None, start: np.ndarray | None = None) -> ChainResult:
    model = model or CompiledModel(phi, config.volume, config.boundary, config.truncation_radius)
    rng = chain_rng(config)
    spins = initial_state(config, model.n, rng) if start is None else np.array(start, dtype=np.int8)
    rec_idx = np.array([model.volume.index[tuple(p)] for p in record_sites], dtype=np.int64)
    energy = np.empty(config.sweeps)
    mag = np.empty(config.sweeps)
    rec = np.empty((config.sweeps, len(rec_idx)), dtype=np.int8)
    done = 0
    while done < config.sweeps:
        k = min(_CHUNK, config.sweeps - done)
        u = rng.random((k, model.n))
        if config.mirror_uniforms:
            u = 1.0 - u
        _kernels.heat_bath_sweeps(spins, model.n, u, model.term_ptr, model.coefs, model.nb_ptr,
                                  model.nb_idx, model.all_ptr, model.all_coefs, model.all_idx,
                                  rec_idx, energy[done:done + k], mag[done:done + k],
                                  rec[done:done + k])
        done += k
    return ChainResult(config, energy, mag, rec, [tuple(p) for p in record_sites], spins,
                       model.tail_bound)


@dataclass(frozen=True)
class MagnetizationEstimate:
    site: Point
    mean: float
    standard_error: float
    samples: int


def batch_means(samples: np.ndarray, batches: int = MIN_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error."""
    x = np.asarray(samples, dtype=float)
    if batches < MIN_BATCHES:
        raise ValueError(f"at least {MIN_BATCHES} batches are required")
    size = x.size // batches
    if size < 1:
        raise ValueError(f"{x.size} samples cannot fill {batches} batches")
    means = x[: size * batches].reshape(batches, size).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / np.sqrt(batches))


def estimate_from(result: ChainResult, site: Point, batches: int = MIN_BATCHES) -> MagnetizationEstimate:
    c = result.config
    j = result.record_sites.index(tuple(site))
    series = result.recorded[c.burn_in::c.thinning, j]
    mean, se = batch_means(series, batches)
    return MagnetizationEstimate(tuple(site), mean, se, int(series.size))


def magnetization(phi: Interaction, config: ChainConfig, site: Point,
                  batches: int = MIN_BATCHES) -> MagnetizationEstimate:
    return estimate_from(run_chain(phi, config, [site]), site, batches)


def center(volume: Rectangle) -> Point:
    return tuple((a + b + 1) // 2 for a, b in zip(volume.lo, volume.hi))


@dataclass(frozen=True)
class CoexistenceResult:
    m_plus: float
    m_minus: float
    gap: float
    se_plus: float
    se_minus: float
    se_gap: float
    symmetric: bool
    seeds: tuple


def coexistence_indicator(phi: Interaction, side: int, truncation_radius: int | None,
                          seeds: Sequence[int], sweeps: int = 4000, burn_in: int = 1000,
                          thinning: int = 1, threads: int = 1, initial: str = "random",
                          interaction_id: str = "") -> CoexistenceResult:
    """Center magnetization under Plus and Minus boundaries, averaged over seeds.

    Plus chains use stream 0 and Minus chains stream 1 of each seed, so the
    two boundaries are sampled independently.  Chains start from i.i.d. fair
    spins by default: a start aligned with the boundary can sit in a
    metastable phase for astronomically long times when a field is present.
    The standard error of each boundary's average combines the per-seed
    batch-means errors.
    """
    symmetric = is_spin_flip_symmetric(phi)
    if not symmetric:
        warnings.warn("interaction is not spin-flip symmetric; the coexistence "
                      "indicator is computed but flagged", stacklevel=2)
    vol = Rectangle.box((side,) * phi.dim)
    site = center(vol)
    models = {kind: CompiledModel(phi, vol, bc, truncation_radius)
              for kind, bc in (("plus", BoundaryCondition.plus()), ("minus", BoundaryCondition.minus()))}
    jobs = [(kind, s) for kind in ("plus", "minus") for s in seeds]

    def work(job):
        kind, seed = job
        bc = models[kind].bc
        cfg = ChainConfig(interaction_id, vol, bc, truncation_radius, seed, sweeps, burn_in,
                          thinning, initial, stream=0 if kind == "plus" else 1)
        return estimate_from(run_chain(phi, cfg, [site], model=models[kind]), site)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        ests = list(pool.map(work, jobs))
    k = len(seeds)
    plus, minus = ests[:k], ests[k:]

    def combine(es):
        m = float(np.mean([e.mean for e in es]))
        se = float(np.sqrt(sum(e.standard_error ** 2 for e in es)) / len(es))
        return m, se

    mp, sp = combine(plus)
    mm, sm = combine(minus)
    return CoexistenceResult(mp, mm, mp - mm, sp, sm, float(np.hypot(sp, sm)), symmetric, tuple(seeds))


def rng_metadata() -> dict:
    return {"algorithm": RNG_ALGORITHM, "numpy": np.__version__}


def write_trajectory_csv(result: ChainResult, fh) -> None:
    fh.write("sweep,energyPerSite,magnetization\n")
    for i, (e, m) in enumerate(zip(result.energy, result.magnetization), start=1):
        fh.write(f"{i},{e:.17g},{m:.17g}\n")


def estimate_json(estimate: MagnetizationEstimate, config: ChainConfig) -> dict:
    return {"site": list(estimate.site), "mean": estimate.mean,
            "standardError": estimate.standard_error, "samples": estimate.samples,
            "chainConfig": config.to_dict(), "rng": rng_metadata()}


def coexistence_json(result: CoexistenceResult) -> dict:
    d = asdict(result)
    d["seeds"] = list(result.seeds)
    d["rng"] = rng_metadata()
    return d


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2)
