"""Fixed particle-number trajectory engine for the bosonic and Jordan-Wigner models.

Trajectories started from occupation basis states keep a definite particle
number: hopping conserves it and the drive only measures and resets single
sites.  The state is therefore stored as ``(k, amplitudes over the C(N, k)
basis states with k particles)``, which cuts the work per Trotter step by the
ratio ``2^N / C(N, k)``.  Basis states inside a sector are ordered by their
full-register index, so conversion to a :class:`~ness2d.qsim.StateVector` is a
scatter.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import qsim
from .lattice import LatticeSpec, peierls_phase
from .model import ModelParams, compile_bond_program, jw_string_mask
from .qsim import UNDERFLOW, NumericalIntegrityError, StateVector


@njit(cache=True, fastmath=True)
def _sector_step(v, off_pair, p01, p10, par, off00, p00, off11, p11, coef):
    for g in range(off_pair.shape[0] - 1):
        e00 = coef[g, 0]
        e11 = coef[g, 1]
        for t in range(off00[g], off00[g + 1]):
            v[p00[t]] *= e00
        for t in range(off11[g], off11[g + 1]):
            v[p11[t]] *= e11
        for t in range(off_pair[g], off_pair[g + 1]):
            i = p01[t]
            j = p10[t]
            a1 = v[i]
            a2 = v[j]
            if par[t]:
                v[i] = coef[g, 6] * a1 + coef[g, 7] * a2
                v[j] = coef[g, 8] * a1 + coef[g, 9] * a2
            else:
                v[i] = coef[g, 2] * a1 + coef[g, 3] * a2
                v[j] = coef[g, 4] * a1 + coef[g, 5] * a2


@njit(cache=True, fastmath=True)
def _pair_expect(v, lo, hi, p01, p10, par):
    re = 0.0
    im = 0.0
    for t in range(lo, hi):
        u = v[p10[t]]
        w = v[p01[t]]
        r = u.real * w.real + u.imag * w.imag
        i = u.real * w.imag - u.imag * w.real
        if par[t]:
            re -= r
            im -= i
        else:
            re += r
            im += i
    return re + 1j * im


class SectorState:
    __slots__ = ("k", "v")

    def __init__(self, k: int, v: np.ndarray):
        self.k = k
        self.v = v


class _SectorTables:
    def __init__(self, states, pairs, diags, occ):
        self.states = states
        self.off_pair, self.p01, self.p10, self.par = pairs
        self.off00, self.p00, self.off11, self.p11 = diags
        self.occ = occ


class SectorEngine:
    """Trotter steps, drive and observables on fixed-number sectors."""

    def __init__(self, lat: LatticeSpec, params: ModelParams):
        if lat.n_sites > 24:
            raise ValueError("sector engine limited to 24 sites")
        self.lat = lat
        self.params = params
        self.n = lat.n_sites
        prog = compile_bond_program(lat, params)
        self.q1, self.q2, self.masks = prog.q1, prog.q2, prog.masks
        coef = np.zeros((len(self.q1), 10), dtype=np.complex128)
        for g in range(len(self.q1)):
            ue, uo = prog.u_even[g], prog.u_odd[g]
            if abs(ue[0, 0] - uo[0, 0]) > 1e-14 or abs(ue[3, 3] - uo[3, 3]) > 1e-14:
                raise AssertionError("string parity must not change the diagonal phases")
            coef[g] = [ue[0, 0], ue[3, 3], ue[1, 1], ue[1, 2], ue[2, 1], ue[2, 2],
                       uo[1, 1], uo[1, 2], uo[2, 1], uo[2, 2]]
        self.coef = coef
        popcount = np.zeros(1 << self.n, dtype=np.int8)
        for q in range(self.n):
            popcount += ((np.arange(1 << self.n) >> q) & 1).astype(np.int8)
        self._popcount = popcount
        self.rank = np.zeros(1 << self.n, dtype=np.int64)
        self._tables: dict[int, _SectorTables] = {}
        self._bonds = lat.bonds
        self._bond_order = [lat.bond_index(int(a), int(b)) for a, b in zip(self.q1, self.q2)]
        self._cur_masks = np.array([jw_string_mask(b) if params.fermionic else 0 for b in lat.bonds])
        self._phases = np.array([np.exp(1j * peierls_phase(b, params.phi)) for b in lat.bonds])
        for k in range(self.n + 1):
            st = np.flatnonzero(popcount == k)
            self.rank[st] = np.arange(st.shape[0])

    def tables(self, k: int) -> _SectorTables:
        tb = self._tables.get(k)
        if tb is None:
            tb = self._build(k)
            self._tables[k] = tb
        return tb

    def _parity(self, x: np.ndarray, mask: int) -> np.ndarray:
        if mask == 0:
            return np.zeros(x.shape[0], dtype=np.int8)
        return (self._popcount[x & mask] & 1).astype(np.int8)

    def _build(self, k: int) -> _SectorTables:
        states = np.flatnonzero(self._popcount == k)
        rank = self.rank
        p01, p10, par, p00, p11 = [], [], [], [], []
        off_pair, off00, off11 = [0], [0], [0]
        for q1, q2, mask in zip(self.q1, self.q2, self.masks):
            b1, b2 = 1 << int(q1), 1 << int(q2)
            has1 = (states & b1) != 0
            has2 = (states & b2) != 0
            s01 = states[~has1 & has2]
            p01.append(rank[s01])
            p10.append(rank[s01 ^ b1 ^ b2])
            par.append(self._parity(s01, int(mask)))
            p00.append(rank[states[~has1 & ~has2]])
            p11.append(rank[states[has1 & has2]])
            off_pair.append(off_pair[-1] + s01.shape[0])
            off00.append(off00[-1] + p00[-1].shape[0])
            off11.append(off11[-1] + p11[-1].shape[0])
        cat = lambda xs, dt: np.ascontiguousarray(np.concatenate(xs).astype(dt)) if xs else np.zeros(0, dt)  # noqa: E731
        pairs = (np.array(off_pair, dtype=np.int64), cat(p01, np.int64), cat(p10, np.int64), cat(par, np.int8))
        diags = (np.array(off00, dtype=np.int64), cat(p00, np.int64),
                 np.array(off11, dtype=np.int64), cat(p11, np.int64))
        occ = ((states[:, None] >> np.arange(self.n)) & 1).astype(float)
        return _SectorTables(states, pairs, diags, occ)

    # --- states ----------------------------------------------------------

    def prepare(self, bits) -> SectorState:
        index = sum(int(b) << q for q, b in enumerate(bits))
        k = int(self._popcount[index])
        v = np.zeros(self.tables(k).states.shape[0], dtype=np.complex128)
        v[self.rank[index]] = 1.0
        return SectorState(k, v)

    def to_statevector(self, s: SectorState) -> StateVector:
        amps = np.zeros(1 << self.n, dtype=np.complex128)
        amps[self.tables(s.k).states] = s.v
        return StateVector(amps, copy=False)

    def from_statevector(self, sv: StateVector) -> SectorState:
        nz = np.flatnonzero(np.abs(sv.amplitudes) > 0)
        ks = set(self._popcount[nz].tolist())
        if len(ks) != 1:
            raise ValueError("state does not have a definite particle number")
        k = ks.pop()
        return SectorState(k, sv.amplitudes[self.tables(k).states].copy())

    # --- dynamics ----------------------------------------------------------

    def step(self, s: SectorState) -> SectorState:
        tb = self.tables(s.k)
        if s.v.shape[0]:
            _sector_step(s.v, tb.off_pair, tb.p01, tb.p10, tb.par, tb.off00, tb.p00, tb.off11, tb.p11,
                         self.coef)
        return s

    def prob_one(self, s: SectorState, q: int) -> float:
        w = s.v.real ** 2 + s.v.imag ** 2
        return float(w @ self.tables(s.k).occ[:, q])

    def measure_reset(self, s: SectorState, q: int, target: int, rng: qsim.RngStream) -> tuple[int, SectorState]:
        """Projective measurement of qubit ``q`` followed by a reset to ``target``."""
        p1 = min(max(self.prob_one(s, q), 0.0), 1.0)
        bit = 1 if rng.uniform() < p1 else 0
        weight = p1 if bit else 1.0 - p1
        if weight < UNDERFLOW:
            raise NumericalIntegrityError(f"measurement branch weight {weight:.3e} on qubit {q}")
        tb = self.tables(s.k)
        keep = tb.occ[:, q] == bit
        scale = 1.0 / math.sqrt(weight)
        if bit == target:
            v = np.where(keep, s.v * scale, 0.0)
            return bit, SectorState(s.k, v)
        k2 = s.k + (1 if target else -1)
        dest = self.rank[tb.states[keep] ^ (1 << q)]
        v2 = np.zeros(self.tables(k2).states.shape[0], dtype=np.complex128)
        v2[dest] = s.v[keep] * scale
        return bit, SectorState(k2, v2)

    # --- observables ---------------------------------------------------------

    def densities(self, s: SectorState) -> np.ndarray:
        w = s.v.real ** 2 + s.v.imag ** 2
        return w @ self.tables(s.k).occ

    def norm(self, s: SectorState) -> float:
        return float(np.linalg.norm(s.v))

    def hop_expectations(self, s: SectorState) -> np.ndarray:
        """``<c_j^dag c_k>`` for every lattice bond (with strings for fermions)."""
        tb = self.tables(s.k)
        out = np.zeros(len(self._bonds), dtype=complex)
        for g, n in enumerate(self._bond_order):
            out[n] = _pair_expect(s.v, tb.off_pair[g], tb.off_pair[g + 1], tb.p01, tb.p10, tb.par)
        return out

    def currents(self, s: SectorState) -> np.ndarray:
        return 2.0 * self.params.J * (self._phases * self.hop_expectations(s)).imag
