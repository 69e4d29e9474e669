"""Densities, bond currents, imbalances, profiles and standard errors.

Every bond current is directed ``j -> k`` (left to right, bottom to top), i.e.
from the source side towards the drain side.  In the ideal simulation each
trajectory contributes exact expectation values, so statistical errors are
standard errors over trajectories.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import qsim
from .lattice import (
    LatticeSpec, boundary_bonds, cut_bonds, diagonal_bonds, edge_bonds, peierls_phase,
    sites_above_diagonal, sites_below_diagonal, taxicab_distance,
)
from .model import ConfigError, Gate, GateSequence, ModelParams
from .qsim import RngStream, StateVector


def stderr(samples: np.ndarray, axis: int = 0) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[axis]
    if n < 2:
        return np.zeros(np.delete(samples.shape, axis))
    return samples.std(axis=axis, ddof=1) / math.sqrt(n)


@dataclass
class Snapshot:
    """Trajectory-averaged densities and bond currents at one period."""

    lattice: LatticeSpec
    density_samples: np.ndarray  # (n_traj, N)
    current_samples: np.ndarray  # (n_traj, n_bonds)
    period: int = -1
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_ensemble(cls, ens, period: int = -1, meta: dict | None = None) -> "Snapshot":
        m = dict(ens.params.to_dict())
        m.update({"seed": ens.seed, "n_trajectories": ens.n_trajectories})
        m.update(meta or {})
        cur = ens.currents[:, -1 if ens.currents.shape[1] == 1 else period, :]
        return cls(ens.lattice, ens.densities[:, period, :], cur, period, m)

    @property
    def n_trajectories(self) -> int:
        return self.density_samples.shape[0]

    @property
    def densities(self) -> np.ndarray:
        return self.density_samples.mean(axis=0)

    @property
    def densities_stderr(self) -> np.ndarray:
        return stderr(self.density_samples)

    @property
    def currents(self) -> np.ndarray:
        return self.current_samples.mean(axis=0)

    @property
    def currents_stderr(self) -> np.ndarray:
        return stderr(self.current_samples)

    def rows(self) -> list[tuple]:
        out = []
        for i, (mu, se) in enumerate(zip(self.densities, self.densities_stderr)):
            out.append(("density", str(i), float(mu), float(se)))
        for b, mu, se in zip(self.lattice.bonds, self.currents, self.currents_stderr):
            out.append(("current", f"{b.j}-{b.k}", float(mu), float(se)))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "index", "mean", "stderr"])
            for row in self.rows():
                w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])

    def to_dict(self) -> dict:
        imb = imbalances(self)
        prof = density_profile(self)
        return {
            "meta": self.meta,
            "period": self.period,
            "n_trajectories": self.n_trajectories,
            "densities": self.densities.tolist(),
            "densities_stderr": self.densities_stderr.tolist(),
            "bonds": [[b.j, b.k] for b in self.lattice.bonds],
            "currents": self.currents.tolist(),
            "currents_stderr": self.currents_stderr.tolist(),
            "imbalance": imb.__dict__,
            "profile": {"distance": prof[0].tolist(), "mean": prof[1].tolist(), "stderr": prof[2].tolist()},
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


# --- derived observables -----------------------------------------------------


def density_profile(snap: Snapshot, reference: int | None = None):
    """Mean density versus taxicab distance from the source (per-trajectory grouping)."""
    lat = snap.lattice
    dist = np.array([taxicab_distance(lat, i, reference) for i in range(lat.n_sites)])
    ds = np.unique(dist)
    per = np.stack([snap.density_samples[:, dist == d].mean(axis=1) for d in ds], axis=1)
    return ds, per.mean(axis=0), stderr(per)


@dataclass
class Imbalance:
    dN: float
    dN_stderr: float
    dJ: float
    dJ_stderr: float


def imbalances(snap: Snapshot) -> Imbalance:
    """Density and edge-current imbalance, below minus above the source-drain diagonal.

    Raises:
        ValueError: the lattice is not square, so the diagonal is not a mirror line.
    """
    lat = snap.lattice
    if lat.width != lat.height:
        raise ValueError(f"imbalances need a square lattice, got {lat.width}x{lat.height}")
    below, above = sites_below_diagonal(lat), sites_above_diagonal(lat)
    dn = snap.density_samples[:, below].sum(axis=1) - snap.density_samples[:, above].sum(axis=1)
    eb, ea = edge_bonds(lat)
    dj = snap.current_samples[:, eb].sum(axis=1) - snap.current_samples[:, ea].sum(axis=1)
    return Imbalance(float(dn.mean()), float(stderr(dn)), float(dj.mean()), float(stderr(dj)))


def cut_currents(snap: Snapshot) -> dict[int, tuple[float, float]]:
    """Summed directed current across every counter-diagonal cut ``d -> d + 1``."""
    lat = snap.lattice
    dmax = taxicab_distance(lat, lat.drain)
    out = {}
    for d in range(dmax):
        s = snap.current_samples[:, cut_bonds(lat, d)].sum(axis=1)
        out[d] = (float(s.mean()), float(stderr(s)))
    return out


def interior_cuts(lat: LatticeSpec) -> list[int]:
    """Cuts whose bonds avoid the source and the drain."""
    dmax = taxicab_distance(lat, lat.drain)
    return list(range(1, dmax - 1))


def cut_averaged_current(snap: Snapshot, cuts: list[int] | None = None) -> tuple[float, float]:
    """Per-trajectory average over ``cuts`` of the cut currents.

    The default is the interior cuts, or every cut on lattices too small to
    have one.
    """
    lat = snap.lattice
    if cuts is None:
        cuts = interior_cuts(lat) or list(range(taxicab_distance(lat, lat.drain)))
    if not cuts:
        raise ValueError("no cuts selected")
    per = np.mean([snap.current_samples[:, cut_bonds(lat, d)].sum(axis=1) for d in cuts], axis=0)
    return float(per.mean()), float(stderr(per))


def current_fraction(snap: Snapshot, bonds: list[int]) -> float:
    """Share of the total current magnitude ``sum |<J_b>|`` carried by ``bonds``."""
    mags = np.abs(snap.currents)
    return float(mags[bonds].sum() / mags.sum())


def boundary_fraction(snap: Snapshot) -> float:
    return current_fraction(snap, boundary_bonds(snap.lattice))


def diagonal_fraction(snap: Snapshot) -> float:
    return current_fraction(snap, diagonal_bonds(snap.lattice))


# --- operator-form currents -------------------------------------------------------


def bond_current(state, lat: LatticeSpec, bond, params: ModelParams, encoding: str | None = None,
                 strict: bool = False) -> float:
    """Expectation of ``-i J (e^{i theta} c_j^dag c_k - h.c.)``.

    ``state`` is a :class:`StateVector` (encodings ``hcb``, ``jw``, ``dk``) or a
    correlation matrix (``gaussian``).  With ``strict`` a bond touching the
    source or drain raises, since the operator is not the instantaneous
    current there.
    """
    if strict and lat.is_driven_bond(bond):
        raise ValueError(f"bond {bond.sites} touches the source or drain")
    enc = encoding or ("jw" if params.fermionic else "hcb")
    theta = peierls_phase(bond, params.phi)
    if enc == "gaussian":
        return float(2.0 * (params.J * np.exp(1j * theta) * state[bond.j, bond.k]).imag)
    if enc == "dk":
        from .fermions import DKEncoding, expect_terms

        return expect_terms(state, DKEncoding(lat).current_terms(bond, params.phi, params.J))
    from . import _kernels as K
    from .model import jw_string_mask

    mask = jw_string_mask(bond) if enc == "jw" else 0
    x = K.hop_expect(state.amplitudes, bond.j, bond.k, mask)
    return float(2.0 * params.J * (np.exp(1j * theta) * x).imag)


# --- circuit-measurement forms ------------------------------------------------------

# TK2(1/4, 1/4, 0) rotates the current eigenbasis (|01> +- i|10>)/sqrt(2) onto |01>, |10>.
MEASURE_TK2 = (0.25, 0.25, 0.0)


def _encoding(lat, encoding):
    if encoding == "dk":
        from .fermions import DKEncoding

        return DKEncoding(lat)
    if encoding == "jw":
        from .fermions import JordanWignerEncoding

        return JordanWignerEncoding(lat)
    return None


def current_measurement_gadget(lat: LatticeSpec, bond, params: ModelParams, encoding: str = "hcb",
                               n_qubits: int | None = None) -> tuple[GateSequence, int]:
    """Gates after which ``J (n_j - n_k)`` (times the returned sign) estimates the bond current.

    For fermionic encodings the bond's string/ancilla dressing is first moved
    onto a Z string and absorbed by CZs, as in the Trotter gadget.
    """
    enc = _encoding(lat, encoding)
    nq = n_qubits or (enc.n_qubits if enc is not None else lat.n_sites)
    seq = GateSequence(nq)
    sign = 1
    if enc is not None:
        from .fermions import _basis_change

        d = enc.dressing(bond)
        sign = d.sign
        basis, _ = _basis_change(d.dressing)
        seq.extend(basis)
        seq.extend([Gate("cz", (q, bond.j), (), "dress") for q in d.dressing.support])
    t = peierls_phase(bond, params.phi) / (2 * math.pi)
    if abs(t) > 0:
        seq.append("rz", (bond.j,), (-t,), "flux")
        seq.append("rz", (bond.k,), (t,), "flux")
    seq.append("tk2", (bond.j, bond.k), MEASURE_TK2, "measure")
    return seq, sign


def current_measurement_basis(lat: LatticeSpec, sector: str, params: ModelParams, encoding: str = "hcb",
                              n_qubits: int | None = None) -> GateSequence:
    """Joint basis change for all bonds of a sector (hard-core bosons).

    Fermionic encodings need per-bond dressings that do not commute with the
    neighbouring rotations; use :func:`measure_current_sector` for them.
    """
    if encoding != "hcb":
        raise ConfigError("joint sector basis only for hard-core bosons; use measure_current_sector")
    seq = GateSequence(n_qubits or lat.n_sites)
    for b in lat.sector_bonds(sector):
        g, _ = current_measurement_gadget(lat, b, params, "hcb", seq.n_qubits)
        seq.extend(g)
    return seq


def measure_current_sector(state: StateVector, lat: LatticeSpec, sector: str, params: ModelParams,
                           rng: RngStream, encoding: str = "hcb") -> tuple[tuple, np.ndarray]:
    """Single-shot current measurement of all bonds in ``sector``.

    Bonds are measured one at a time (gadget, measure both ends, undo the
    gadget); the bond observables commute, so the joint statistics are exact.
    Remaining sites are then measured in the Z basis.  Returns the per-site
    bits and the per-bond single-shot current estimates (NaN off-sector).
    """
    work = state.copy()
    bits = [None] * lat.n_sites
    est = np.full(len(lat.bonds), np.nan)
    for b in lat.sector_bonds(sector):
        g, sign = current_measurement_gadget(lat, b, params, encoding, work.n_qubits)
        g.apply(work)
        bj, work = qsim.measure(work, b.j, rng)
        bk, work = qsim.measure(work, b.k, rng)
        g.inverse().apply(work)
        bits[b.j], bits[b.k] = bj, bk
        est[lat.bond_index(b.j, b.k)] = sign * params.J * (bj - bk)
    for q in range(lat.n_sites):
        if bits[q] is None:
            bits[q], work = qsim.measure(work, q, rng)
    return tuple(bits), est


# --- stationarity ------------------------------------------------------------------


@dataclass
class StationarityEntry:
    name: str
    settled_at: int | None
    settled: bool


def stationarity_report(series: dict[str, np.ndarray], window: int = 3, rtol: float = 0.01,
                        atol: float = 1e-3) -> list[StationarityEntry]:
    """Settling period of each observable's rolling mean.

    ``series[name][t]`` is the value after period ``t`` (``t = 0`` is the
    initial state).  With ``r`` the trailing rolling mean, a step ``t`` is
    quiet when ``|r[t] - r[t - window]| <= rtol * |r[t]| + atol``.  The
    observable settles at period ``s >= 1`` when every step from
    ``s - 1 + window`` on is quiet; a constant series settles at period 1.
    Observables with a loud final step are flagged as not settled.

    Raises:
        ValueError: a series too short to compare two windows.
    """
    from .channel import rolling_mean

    out = []
    for name, x in series.items():
        x = np.asarray(x, dtype=float)
        if x.shape[0] <= window:
            raise ValueError(f"series {name!r} has {x.shape[0]} points, need more than {window}")
        r = rolling_mean(x, window)
        quiet = np.array([abs(r[t] - r[t - window]) <= rtol * abs(r[t]) + atol
                          for t in range(window, r.shape[0])], bool)
        settled_at = None
        for t0 in range(quiet.shape[0]):
            if quiet[t0:].all():
                settled_at = t0 + 1
                break
        out.append(StationarityEntry(name, settled_at, settled_at is not None))
    return out
