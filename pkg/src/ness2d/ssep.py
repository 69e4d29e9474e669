"""Classical symmetric exclusion process with the same corner drive.

One micro-step picks the source with probability ``gamma / (M + 2 gamma)``
(fill it), the drain with the same probability (empty it), or otherwise one of
the ``M`` bonds uniformly and proposes to swap its two occupations.  Swaps are
accepted with the Metropolis rule ``min(1, exp(E_old - E_new))`` for
``E = -V * (number of occupied nearest-neighbour pairs)``, so ``V > 0`` is an
attraction.  One unit of time is ``N`` micro-steps for ``N`` sites.
"""

from __future__ import annotations

import math
import csv
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats

from .lattice import LatticeSpec, build_lattice
from .qsim import RngStream


@dataclass(frozen=True)
class SsepConfig:
    """Parameters of a driven exclusion-process ensemble."""

    lattice: LatticeSpec = field(default_factory=lambda: build_lattice(4, 4))
    V: float = 1.0
    gamma: float = 2.0
    steps: int = 300
    trajectories: int = 100_000
    seed: int = 0
    fill: float = 0.5

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.steps < 0 or self.trajectories <= 0:
            raise ValueError("steps must be >= 0 and trajectories > 0")
        if not 0.0 <= self.fill <= 1.0:
            raise ValueError("fill must lie in [0, 1]")

    @property
    def n_bonds(self) -> int:
        return len(self.lattice.bonds)

    def selection_probabilities(self) -> tuple[float, float, float]:
        """Probabilities of (any bond, source, drain) in one micro-step."""
        tot = self.n_bonds + 2.0 * self.gamma
        return self.n_bonds / tot, self.gamma / tot, self.gamma / tot


@dataclass
class SsepState:
    occupation: np.ndarray  # int64 bits, one per site
    micro_steps: int = 0

    def __post_init__(self):
        self.occupation = np.asarray(self.occupation, dtype=np.int64)
        if np.any((self.occupation != 0) & (self.occupation != 1)):
            raise ValueError("occupations must be 0 or 1")

    @property
    def time_units(self) -> float:
        return self.micro_steps / self.occupation.size

    @property
    def n_particles(self) -> int:
        return int(self.occupation.sum())


@dataclass
class DensityField:
    width: int
    height: int
    mean: np.ndarray  # (N,)
    stderr: np.ndarray  # (N,)
    n_trajectories: int
    series: np.ndarray | None = None  # (steps + 1, N) mean occupation per time unit

    def grid(self) -> np.ndarray:
        """Mean density as ``[y, x]`` array."""
        return self.mean.reshape(self.height, self.width)

    def rows(self) -> list[tuple]:
        return [(i % self.width, i // self.width, float(m), float(s))
                for i, (m, s) in enumerate(zip(self.mean, self.stderr))]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "density", "stderr"])
            w.writerows(self.rows())


def _geometry(lat: LatticeSpec):
    bonds = np.array([[b.j, b.k] for b in lat.bonds], dtype=np.int64).reshape(-1, 2)
    nbr = np.full((lat.n_sites, 4), -1, dtype=np.int64)
    for i in range(lat.n_sites):
        nb = lat.neighbours(i)
        nbr[i, : len(nb)] = nb
    return bonds, nbr


def energy(occ: np.ndarray, bonds: np.ndarray, V: float) -> float:
    occ = np.asarray(occ)
    return -V * float(np.sum(occ[bonds[:, 0]] * occ[bonds[:, 1]]))


@njit(cache=True, inline="always")
def _occupied_neighbours(occ, nbr, site, skip):
    c = 0
    for t in range(nbr.shape[1]):
        l = nbr[site, t]
        if l >= 0 and l != skip:
            c += occ[l]
    return c


@njit(cache=True)
def _swap_energy_change(occ, nbr, bonds, b, V):
    """Return (dE, i, j) for moving the particle across bond ``b``; i = -1 if no move."""
    i = bonds[b, 0]
    j = bonds[b, 1]
    if occ[i] == occ[j]:
        return 0.0, -1, -1
    if occ[j] == 1:
        i, j = j, i
    dE = -V * (_occupied_neighbours(occ, nbr, j, i) - _occupied_neighbours(occ, nbr, i, j))
    return dE, i, j


@njit(cache=True)
def _select(u, n_bonds, gamma):
    """Map a uniform draw to -1 (source), -2 (drain) or a bond index."""
    x = u * (n_bonds + 2.0 * gamma)
    if x < gamma:
        return -1
    if x < 2.0 * gamma:
        return -2
    b = int(x - 2.0 * gamma)
    return b if b < n_bonds else n_bonds - 1


@njit(cache=True)
def _run_batch(seeds, steps, record, bonds, nbr, V, gamma, source, drain, fill, n_sites):
    total = np.zeros(n_sites)
    series = np.zeros((steps + 1 if record else 1, n_sites))
    occ = np.zeros(n_sites, dtype=np.int64)
    M = bonds.shape[0]
    for t in range(seeds.shape[0]):
        np.random.seed(seeds[t])
        for s in range(n_sites):
            occ[s] = 1 if np.random.random() < fill else 0
        if record:
            for s in range(n_sites):
                series[0, s] += occ[s]
        for unit in range(steps):
            for _ in range(n_sites):
                c = _select(np.random.random(), M, gamma)
                if c == -1:
                    occ[source] = 1
                elif c == -2:
                    occ[drain] = 0
                else:
                    dE, i, j = _swap_energy_change(occ, nbr, bonds, c, V)
                    if i >= 0 and (dE <= 0.0 or np.random.random() < math.exp(-dE)):
                        occ[i] = 0
                        occ[j] = 1
            if record:
                for s in range(n_sites):
                    series[unit + 1, s] += occ[s]
        for s in range(n_sites):
            total[s] += occ[s]
    return total, series


def initial_state(config: SsepConfig, rng: RngStream) -> SsepState:
    """Independent Bernoulli(fill) occupations, one draw per site."""
    u = rng.uniforms(config.lattice.n_sites)
    return SsepState((u < config.fill).astype(np.int64))


def ssep_step(state: SsepState, config: SsepConfig, rng: RngStream) -> SsepState:
    """One micro-step in place.  Draws one uniform, plus one more for uphill swaps."""
    lat = config.lattice
    bonds, nbr = _geometry(lat)
    c = _select(rng.uniform(), bonds.shape[0], float(config.gamma))
    occ = state.occupation
    if c == -1:
        occ[lat.source] = 1
    elif c == -2:
        occ[lat.drain] = 0
    else:
        dE, i, j = _swap_energy_change(occ, nbr, bonds, c, float(config.V))
        if i >= 0 and (dE <= 0.0 or rng.uniform() < math.exp(-dE)):
            occ[i] = 0
            occ[j] = 1
    state.micro_steps += 1
    return state


def trajectory_seeds(seed: int, n: int, start: int = 0) -> np.ndarray:
    """Per-trajectory 32-bit seeds; trajectory ``t`` always receives word ``t``.

    Words come from one ``SeedSequence`` hash of ``seed``, so results do not
    depend on how the ensemble is split into chunks.
    """
    words = np.random.SeedSequence(seed).generate_state(start + n, dtype=np.uint32)
    return words[start:].astype(np.int64)


def ssep_ness(config: SsepConfig, record: bool = False, chunk: int = 20_000) -> DensityField:
    """Occupation after ``config.steps`` time units averaged over trajectories."""
    lat = config.lattice
    bonds, nbr = _geometry(lat)
    n = lat.n_sites
    total = np.zeros(n)
    series = None
    done = 0
    while done < config.trajectories:
        k = min(chunk, config.trajectories - done)
        seeds = trajectory_seeds(config.seed, k, done)
        tot, ser = _run_batch(seeds, config.steps, record, bonds, nbr, float(config.V), float(config.gamma),
                              lat.source, lat.drain, float(config.fill), n)
        total += tot
        if record:
            series = ser if series is None else series + ser
        done += k
    mean = total / done
    err = np.sqrt(np.clip(mean * (1 - mean), 0, None) / max(done - 1, 1))
    return DensityField(lat.width, lat.height, mean, err, done, None if series is None else series / done)


def block_and_edge_means(field_: DensityField) -> tuple[float, float]:
    """Mean density of the 3x3 block at the source corner and of the two drain edges.

    The drain edges are the top row and the right column (the drain sits at
    the top-right corner); their union is counted once per site.
    """
    g = field_.grid()
    block = float(g[:3, :3].mean())
    edge_sites = {(field_.height - 1, x) for x in range(field_.width)}
    edge_sites |= {(y, field_.width - 1) for y in range(field_.height)}
    edge = float(np.mean([g[y, x] for y, x in sorted(edge_sites)]))
    return block, edge


def configurations(n_sites: int, n_particles: int) -> list[tuple]:
    from itertools import combinations

    out = []
    for occ_sites in combinations(range(n_sites), n_particles):
        out.append(tuple(1 if s in occ_sites else 0 for s in range(n_sites)))
    return out


@dataclass
class BoltzmannCheck:
    configurations: list
    observed: np.ndarray
    expected: np.ndarray
    chi2: float
    dof: int
    p_value: float


def boltzmann_check(width: int = 2, height: int = 2, n_particles: int = 2, V: float = 1.0,
                    n_samples: int = 1_000_000, micro_steps: int = 100, seed: int = 0) -> BoltzmannCheck:
    """Undriven chains at fixed particle number versus ``exp(-E)`` weights.

    Each sample is the final configuration of a separate chain started from a
    uniformly random configuration, so the chi-square statistic is not
    inflated by autocorrelation.  The chains consume consecutive draws of one
    seeded generator.
    """
    lat = build_lattice(width, height)
    bonds, nbr = _geometry(lat)
    n = lat.n_sites
    confs = configurations(n, n_particles)
    index = {c: i for i, c in enumerate(confs)}
    chain_seed = int(trajectory_seeds(seed, 1)[0])
    finals = _fixed_number_chains(chain_seed, n_samples, micro_steps, bonds, nbr, float(V), n, n_particles)
    counts = np.zeros(len(confs))
    keys = finals @ (1 << np.arange(n))
    code_to_conf = {sum(b << q for q, b in enumerate(c)): index[c] for c in confs}
    for code, cnt in zip(*np.unique(keys, return_counts=True)):
        counts[code_to_conf[int(code)]] += cnt
    w = np.array([math.exp(-energy(np.array(c), bonds, V)) for c in confs])
    expected = n_samples * w / w.sum()
    chi2, p = stats.chisquare(counts, expected)
    return BoltzmannCheck(confs, counts, expected, float(chi2), len(confs) - 1, float(p))


@njit(cache=True)
def _fixed_number_chains(seed, n_chains, micro_steps, bonds, nbr, V, n_sites, n_particles):
    finals = np.zeros((n_chains, n_sites), dtype=np.int64)
    occ = np.zeros(n_sites, dtype=np.int64)
    np.random.seed(seed)
    for t in range(n_chains):
        perm = np.random.permutation(n_sites)
        occ[:] = 0
        for s in range(n_particles):
            occ[perm[s]] = 1
        for _ in range(micro_steps):
            b = _select(np.random.random(), bonds.shape[0], 0.0)
            dE, i, j = _swap_energy_change(occ, nbr, bonds, b, V)
            if i >= 0 and (dE <= 0.0 or np.random.random() < math.exp(-dE)):
                occ[i] = 0
                occ[j] = 1
        finals[t] = occ
    return finals
