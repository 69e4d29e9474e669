"""Free-fermion (V = 0) trajectories on the correlation matrix ``C_ij = <c_i^dag c_j>``.

Hopping evolves ``C -> W C W^dag`` with ``W = exp(i h^T dt)`` for the
single-particle matrix ``h``.  A projective occupation measurement of site
``s`` keeps the state Gaussian; by Wick's theorem, for ``i, j != s``,

    outcome 1:  C_ij -> C_ij - C_is C_sj / C_ss
    outcome 0:  C_ij -> C_ij + C_is C_sj / (1 - C_ss)

after which row and column ``s`` decouple and ``C_ss`` is set to the reset
target.  Averaging over coins and outcomes gives a closed linear map on the
mean correlation matrix, used for exact ensemble-averaged NESS currents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import DriveEvent, TrajectoryRecord, initial_bits
from .lattice import SECTOR_ORDER, LatticeSpec, peierls_phase
from .model import ConfigError, ModelParams, coin_angle, fill_probability
from .qsim import UNDERFLOW, NumericalIntegrityError, RngStream


def single_particle_hamiltonian(lat: LatticeSpec, J: float = 1.0, phi: float = 0.0, bonds=None) -> np.ndarray:
    """``h`` with ``H = sum_ij h_ij c_i^dag c_j``."""
    h = np.zeros((lat.n_sites, lat.n_sites), dtype=complex)
    for b in lat.bonds if bonds is None else bonds:
        amp = -J * np.exp(1j * peierls_phase(b, phi))
        h[b.j, b.k] += amp
        h[b.k, b.j] += np.conj(amp)
    return h


def free_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """``W = exp(i h^T dt)`` via the eigendecomposition of the Hermitian ``h^T``."""
    w, v = np.linalg.eigh(h.T)
    return (v * np.exp(1j * w * dt)) @ v.conj().T


def trotter_propagator(lat: LatticeSpec, params: ModelParams) -> np.ndarray:
    """Single-particle image of the four-sector Trotter step (V must vanish)."""
    W = np.eye(lat.n_sites, dtype=complex)
    for name in SECTOR_ORDER:
        h = single_particle_hamiltonian(lat, params.J, params.phi, lat.sector_bonds(name))
        W = free_propagator(h, params.dt) @ W
    return W


def evolve_free(C: np.ndarray, W: np.ndarray) -> np.ndarray:
    return W @ C @ W.conj().T


def densities(C: np.ndarray) -> np.ndarray:
    return np.real(np.diag(C)).copy()


def currents(C: np.ndarray, lat: LatticeSpec, J: float = 1.0, phi: float = 0.0) -> np.ndarray:
    """Bond currents ``2 Im(J e^{i theta} C_jk)`` (flow j -> k)."""
    return np.array([2.0 * (J * np.exp(1j * peierls_phase(b, phi)) * C[b.j, b.k]).imag for b in lat.bonds])


def wick_four_point(C: np.ndarray, i: int, j: int, k: int, l: int) -> complex:
    """``<c_i^dag c_j c_k^dag c_l>`` of a number-conserving Gaussian state."""
    return C[i, j] * C[k, l] + C[i, l] * ((j == k) - C[k, j])


def condition(C: np.ndarray, site: int, bit: int) -> np.ndarray:
    """Post-measurement correlation matrix for occupation ``bit`` on ``site``."""
    n = float(C[site, site].real)
    w = n if bit else 1.0 - n
    if w < UNDERFLOW:
        raise NumericalIntegrityError(f"measurement branch weight {w:.3e} on site {site}")
    outer = np.outer(C[:, site], C[site, :])
    out = C - outer / n if bit else C + outer / (1.0 - n)
    out[site, :] = 0.0
    out[:, site] = 0.0
    out[site, site] = bit
    return out


def gaussian_drive(C: np.ndarray, site: int, target: int, p: float, rng: RngStream,
                   coin_p: float | None = None) -> tuple[DriveEvent, np.ndarray]:
    """Same draw order and decisions as :func:`ness2d.channel.drive_site`."""
    cp = fill_probability(coin_angle(p)) if coin_p is None else coin_p
    if not rng.uniform() < cp:
        return DriveEvent(site, 0, -1, target), C
    n = min(max(float(C[site, site].real), 0.0), 1.0)
    bit = 1 if rng.uniform() < n else 0
    C = condition(C, site, bit)
    C[site, site] = target
    return DriveEvent(site, 1, bit, target), C


def _check_free(params: ModelParams) -> None:
    if params.V != 0.0:
        raise ConfigError("the Gaussian backend needs V = 0")
    if not params.fermionic:
        raise ConfigError("the Gaussian backend simulates fermions")


def run_gaussian_trajectory(params: ModelParams, lat: LatticeSpec, rng: RngStream, *,
                            propagator: np.ndarray | None = None, propagation: str = "exact",
                            observe: str = "every") -> tuple[TrajectoryRecord, np.ndarray]:
    """Correlation-matrix trajectory; ``propagation`` is ``"exact"`` or ``"trotter"``."""
    _check_free(params)
    if propagator is None:
        if propagation == "exact":
            propagator = free_propagator(single_particle_hamiltonian(lat, params.J, params.phi), params.dt)
        else:
            propagator = trotter_propagator(lat, params)
    m = params.m
    bits = initial_bits(params, lat, rng)
    C = np.diag(np.array(bits, dtype=complex))
    coins = np.zeros((m, 2), dtype=np.int8)
    pre = np.full((m, 2), -1, dtype=np.int8)
    every = observe == "every"
    dens = [densities(C)] if every else None
    curr = [currents(C, lat, params.J, params.phi)] if every else None
    cp = fill_probability(coin_angle(params.p))
    for t in range(m):
        C = evolve_free(C, propagator)
        ev, C = gaussian_drive(C, lat.source, 1, params.p, rng, cp)
        coins[t, 0], pre[t, 0] = ev.coin, ev.pre_bit
        ev, C = gaussian_drive(C, lat.drain, 0, params.p, rng, cp)
        coins[t, 1], pre[t, 1] = ev.coin, ev.pre_bit
        if every:
            dens.append(densities(C))
            curr.append(currents(C, lat, params.J, params.phi))
    if not every:
        dens = [densities(C)]
        curr = [currents(C, lat, params.J, params.phi)]
    rec = TrajectoryRecord(rng.seed, rng.stream_id, bits, coins, pre,
                           densities=np.array(dens), currents=np.array(curr))
    return rec, C


# --- ensemble-averaged dynamics ---------------------------------------------------


def averaged_drive(C: np.ndarray, site: int, target: int, p: float) -> np.ndarray:
    """Mean over coin and outcome: ``(1 - p) C + p D_s(C)``."""
    out = C.copy()
    out[site, :] *= 1.0 - p
    out[:, site] *= 1.0 - p
    out[site, site] = (1.0 - p) * C[site, site] + p * target
    return out


def averaged_period(C: np.ndarray, W: np.ndarray, p: float, lat: LatticeSpec) -> tuple[np.ndarray, float, float]:
    """One period of the mean map; also returns the expected in/outflow counts."""
    C = evolve_free(C, W)
    inflow = p * (1.0 - C[lat.source, lat.source].real)
    C = averaged_drive(C, lat.source, 1, p)
    outflow = p * C[lat.drain, lat.drain].real
    C = averaged_drive(C, lat.drain, 0, p)
    return C, inflow, outflow


@dataclass
class SweepRow:
    dt: float
    p: float
    gamma: float
    current: float
    stderr: float
    steps_to_stationarity: int
    converged: bool

    def as_tuple(self):
        return (self.dt, self.p, self.gamma, self.current, self.stderr, self.steps_to_stationarity)


def ness_current_mean(lat: LatticeSpec, params: ModelParams, *, propagation: str = "exact",
                      rtol: float = 1e-6, max_steps: int = 200000, C0: np.ndarray | None = None):
    """Iterate the averaged map until the drive-event current is stationary.

    Stationarity: the relative change of the in/outflow average over two
    consecutive windows of ``max(20, ceil(1 / dt))`` periods drops below ``rtol``.
    Returns ``(current, steps, converged, C)``.
    """
    _check_free(params)
    if propagation == "exact":
        W = free_propagator(single_particle_hamiltonian(lat, params.J, params.phi), params.dt)
    else:
        W = trotter_propagator(lat, params)
    C = 0.5 * np.eye(lat.n_sites, dtype=complex) if C0 is None else C0.copy()
    window = max(20, math.ceil(1.0 / params.dt))
    flows = []
    prev = None
    for step in range(1, max_steps + 1):
        C, fin, fout = averaged_period(C, W, params.p, lat)
        flows.append(0.5 * (fin + fout) / params.dt)
        if step % window == 0:
            cur = float(np.mean(flows[-window:]))
            if prev is not None and abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
                return cur, step, True, C
            prev = cur
    return float(np.mean(flows[-window:])), max_steps, False, C


def gamma_sweep(lat: LatticeSpec, dts, gammas, *, J: float = 1.0, phi: float = 0.0, method: str = "mean",
                n_trajectories: int = 200, seed: int = 0, periods: int | None = None,
                propagation: str = "exact") -> list[SweepRow]:
    """NESS net current versus drive rate ``gamma = p / dt`` on a grid.

    ``method="mean"`` iterates the exact averaged map (no sampling noise);
    ``method="trajectories"`` estimates the current from sampled drive events
    over the second half of ``periods`` periods.
    """
    rows = []
    for dt in dts:
        for g in gammas:
            p = g * dt
            if p > 1.0:
                raise ConfigError(f"gamma = {g} at dt = {dt} gives p > 1")
            params = ModelParams(J=J, V=0.0, phi=phi, dt=dt, m=1, gamma=g, statistics="fermion")
            if method == "mean":
                cur, steps, conv, _ = ness_current_mean(lat, params, propagation=propagation)
                rows.append(SweepRow(dt, p, g, cur, 0.0, steps, conv))
            elif method == "trajectories":
                mm = periods or int(math.ceil(40.0 / dt))
                pr = params.with_(m=mm)
                W = (free_propagator(single_particle_hamiltonian(lat, J, phi), dt) if propagation == "exact"
                     else trotter_propagator(lat, pr))
                per = []
                for n in range(n_trajectories):
                    rec, _ = run_gaussian_trajectory(pr, lat, RngStream(seed, n), propagator=W, observe="final")
                    half = mm // 2
                    fin = ((rec.coins[half:, 0] == 1) & (rec.pre_bits[half:, 0] == 0)).mean()
                    fout = ((rec.coins[half:, 1] == 1) & (rec.pre_bits[half:, 1] == 1)).mean()
                    per.append(0.5 * (fin + fout) / dt)
                per = np.array(per)
                rows.append(SweepRow(dt, p, g, float(per.mean()), float(per.std(ddof=1) / math.sqrt(len(per))),
                                     mm // 2, True))
            else:
                raise ConfigError(f"unknown sweep method {method!r}")
    return rows
