"""Corner drive: Kraus and Lindblad oracles, drive events, quantum trajectories.

Each period applies one Trotter step and then drives the source and the drain.
With probability ``p`` the source is measured and reset to ``|1>`` and, with
an independent probability ``p``, the drain is measured and reset to ``|0>``.
Averaged over outcomes this is the nine-operator Kraus map with
``{sqrt(1-p) 1, sqrt(p) c_s^dag, sqrt(p) n_s}`` on the source and
``{sqrt(1-p) 1, sqrt(p) (1 - n_d), sqrt(p) c_d}`` on the drain.

Random draws are consumed in a fixed order per trajectory: one per drawn site
of the initial state (see :func:`initial_bits`), then per period ``coin_s``, ``meas_s`` (if the coin fired),
``coin_d``, ``meas_d`` (if fired), then one per qubit for a final shot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _kernels as K
from . import qsim
from .lattice import LatticeSpec, peierls_phase
from .model import (
    ConfigError, ModelParams, coin_angle, compile_bond_program, fill_probability, qubit_hamiltonian,
)
from .qsim import NumericalIntegrityError, RngStream, StateVector

SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
SIGMA_MINUS = SIGMA_PLUS.T.copy()
N_OP = np.diag([0.0, 1.0]).astype(complex)
P_HALF = float(abs(qsim.H[1, 0]) ** 2)


# --- Kraus map -------------------------------------------------------------


def source_kraus(p: float) -> list[np.ndarray]:
    return [math.sqrt(1 - p) * qsim.I2, math.sqrt(p) * SIGMA_PLUS, math.sqrt(p) * N_OP]


def drain_kraus(p: float) -> list[np.ndarray]:
    return [math.sqrt(1 - p) * qsim.I2, math.sqrt(p) * (qsim.I2 - N_OP), math.sqrt(p) * SIGMA_MINUS]


def kraus_operators(p: float) -> list[np.ndarray]:
    """The nine products ``K^s (x) K^d`` on the (source, drain) pair."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return [np.kron(ks, kd) for ks in source_kraus(p) for kd in drain_kraus(p)]


def embed(op: np.ndarray, q: int, n: int) -> np.ndarray:
    """Single-qubit operator on qubit ``q`` of an ``n``-qubit register."""
    out = np.ones((1, 1), dtype=complex)
    for r in reversed(range(n)):
        out = np.kron(out, op if r == q else qsim.I2)
    return out


def apply_cptp_step(rho: np.ndarray, lat: LatticeSpec, p: float, *, unitary: np.ndarray | None = None,
                    hamiltonian: np.ndarray | None = None, dt: float | None = None) -> np.ndarray:
    """One period of the averaged map ``rho -> sum_k K_k U rho U^dag K_k^dag``.

    Pass either the one-period ``unitary`` or a dense ``hamiltonian`` with ``dt``.
    """
    if unitary is None:
        if hamiltonian is None or dt is None:
            raise ValueError("need a unitary or a hamiltonian with dt")
        unitary = sla.expm(-1j * dt * np.asarray(hamiltonian))
    n = int(round(math.log2(rho.shape[0])))
    rho = unitary @ rho @ unitary.conj().T
    for q, ops in ((lat.source, source_kraus(p)), (lat.drain, drain_kraus(p))):
        rho = apply_local_channel(rho, ops, q, n)
    return rho


def apply_local_channel(rho: np.ndarray, kraus: list[np.ndarray], q: int, n: int) -> np.ndarray:
    """``sum_k K_k rho K_k^dag`` for single-qubit ``K_k`` acting on qubit ``q``."""
    hi, lo = 1 << (n - q - 1), 1 << q
    r = rho.reshape(hi, 2, lo, hi, 2, lo)
    out = np.zeros_like(r)
    for k in kraus:
        out += np.einsum("ab,ibjkcl,dc->iajkdl", k, r, k.conj(), optimize=True)
    return out.reshape(rho.shape)


def jump_operators(lat: LatticeSpec, gamma: float, n_qubits: int | None = None) -> list[np.ndarray]:
    n = lat.n_sites if n_qubits is None else n_qubits
    g = math.sqrt(gamma)
    return [
        g * embed(N_OP, lat.source, n), g * embed(SIGMA_PLUS, lat.source, n),
        g * embed(qsim.I2 - N_OP, lat.drain, n), g * embed(SIGMA_MINUS, lat.drain, n),
    ]


def lindblad_rhs(rho: np.ndarray, hamiltonian: np.ndarray, jumps: list[np.ndarray]) -> np.ndarray:
    out = -1j * (hamiltonian @ rho - rho @ hamiltonian)
    for L in jumps:
        LdL = L.conj().T @ L
        out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def integrate_lindblad(rho0: np.ndarray, hamiltonian: np.ndarray, jumps: list[np.ndarray], t: float,
                       h: float, record_every: int | None = None):
    """Fixed-step RK4 to time ``t``; returns the final state (and samples if requested)."""
    n_steps = int(round(t / h))
    if not math.isclose(n_steps * h, t, rel_tol=1e-9):
        raise ValueError("t must be an integer multiple of the RK4 step")
    rho = np.array(rho0, dtype=complex)
    samples = [rho.copy()] if record_every else None
    f = lambda r: lindblad_rhs(r, hamiltonian, jumps)  # noqa: E731
    for s in range(n_steps):
        k1 = f(rho)
        k2 = f(rho + 0.5 * h * k1)
        k3 = f(rho + 0.5 * h * k2)
        k4 = f(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if record_every and (s + 1) % record_every == 0:
            samples.append(rho.copy())
    return (rho, samples) if record_every else rho


def rho_densities(rho: np.ndarray, n_sites: int) -> np.ndarray:
    diag = np.real(np.diag(rho))
    idx = np.arange(diag.shape[0])
    return np.array([diag[((idx >> q) & 1) == 1].sum() for q in range(n_sites)])



def current_operator(lat: LatticeSpec, bond, params: ModelParams, n_qubits: int | None = None) -> np.ndarray:
    """Dense ``-i J (e^{i theta} c_j^dag c_k - h.c.)`` on the site register (with a string for fermions)."""
    n = n_qubits or lat.n_sites
    hop = embed(SIGMA_PLUS, bond.j, n) @ embed(SIGMA_MINUS, bond.k, n)
    if params.fermionic:
        for q in range(bond.j + 1, bond.k):
            hop = hop @ embed(qsim.Z, q, n)
    a = np.exp(1j * peierls_phase(bond, params.phi)) * hop
    return -1j * params.J * (a - a.conj().T)


def rho_currents(rho: np.ndarray, lat: LatticeSpec, params: ModelParams) -> np.ndarray:
    n = int(round(math.log2(rho.shape[0])))
    return np.array([float(np.real(np.trace(rho @ current_operator(lat, b, params, n)))) for b in lat.bonds])

# --- drive -----------------------------------------------------------------


@dataclass(frozen=True)
class DriveEvent:
    site: int
    coin: int
    pre_bit: int  # -1 when the coin did not fire
    target: int


def drive_site(state: StateVector, qubit: int, target: int, p: float, rng: RngStream,
               coin_p: float | None = None) -> tuple[DriveEvent, StateVector]:
    """Toss the coin and, if it fires, measure ``qubit`` and reset it to ``target``."""
    cp = fill_probability(coin_angle(p)) if coin_p is None else coin_p
    coin = 1 if rng.uniform() < cp else 0
    if not coin:
        return DriveEvent(qubit, 0, -1, target), state
    bit, state = qsim.measure(state, qubit, rng)
    if bit != target:
        K.flip(state.amplitudes, qubit)
    return DriveEvent(qubit, 1, bit, target), state


# --- trajectory records ------------------------------------------------------


@dataclass
class TrajectoryRecord:
    seed: int
    stream: int
    init_bits: tuple
    coins: np.ndarray  # (m, 2) source, drain
    pre_bits: np.ndarray  # (m, 2), -1 where the coin did not fire
    final_basis: str | None = None
    final_bits: tuple | None = None
    densities: np.ndarray | None = None  # (m + 1, N) exact expectation values
    currents: np.ndarray | None = None  # (m + 1, n_bonds) or (1, n_bonds)

    def validate(self) -> None:
        fired = self.coins == 1
        if np.any(self.pre_bits[fired] < 0) or np.any(self.pre_bits[~fired] >= 0):
            raise NumericalIntegrityError("pre-reset bits must be present exactly when the coin fired")

    def events(self) -> list[DriveEvent]:
        return [
            DriveEvent(-1, int(self.coins[t, s]), int(self.pre_bits[t, s]), 1 - s)
            for t in range(self.coins.shape[0]) for s in range(2)
        ]

    def to_json(self) -> str:
        return json.dumps({
            "seed": self.seed, "stream": self.stream, "init_bits": list(map(int, self.init_bits)),
            "coins": self.coins.tolist(), "pre_bits": self.pre_bits.tolist(),
            "final_basis": self.final_basis,
            "final_bits": None if self.final_bits is None else list(map(int, self.final_bits)),
        })

    @classmethod
    def from_json(cls, line: str) -> "TrajectoryRecord":
        d = json.loads(line)
        rec = cls(d["seed"], d["stream"], tuple(d["init_bits"]),
                  np.array(d["coins"], dtype=np.int8).reshape(-1, 2),
                  np.array(d["pre_bits"], dtype=np.int8).reshape(-1, 2),
                  d.get("final_basis"), None if d.get("final_bits") is None else tuple(d["final_bits"]))
        rec.validate()
        return rec


# --- propagation backends -----------------------------------------------------


class _Backend:
    """Dense state-vector backend; subclasses supply ``step``."""

    n_qubits: int
    name = "dense"

    def __init__(self, lat: LatticeSpec, params: ModelParams):
        self.lat = lat
        self.params = params

    def prepare(self, bits):
        return StateVector.from_bits(list(bits) + [0] * (self.n_qubits - len(bits)))

    def drive(self, state, qubit: int, target: int, p: float, rng: RngStream, coin_p: float):
        return drive_site(state, qubit, target, p, rng, coin_p)

    def to_statevector(self, state) -> StateVector:
        return state

    def check_norm(self, state) -> None:
        state.check_norm()

    def densities(self, state) -> np.ndarray:
        return K.site_densities(state.amplitudes, self.lat.n_sites)

    def currents(self, state) -> np.ndarray:
        from .model import jw_string_mask

        J, phi = self.params.J, self.params.phi
        out = np.empty(len(self.lat.bonds))
        for n, b in enumerate(self.lat.bonds):
            mask = jw_string_mask(b) if self.params.fermionic else 0
            x = K.hop_expect(state.amplitudes, b.j, b.k, mask)
            out[n] = 2.0 * J * (np.exp(1j * peierls_phase(b, phi)) * x).imag
        return out


class _DenseBackend(_Backend):
    """Full-register state vector with fused bond unitaries."""

    def __init__(self, lat, params):
        super().__init__(lat, params)
        self.n_qubits = lat.n_sites
        self.program = compile_bond_program(lat, params)

    def step(self, state: StateVector) -> StateVector:
        self.program.apply(state.amplitudes)
        return state


class _SectorBackend(_Backend):
    """Fixed particle-number engine (same draws and decisions as the dense one)."""

    name = "sector"

    def __init__(self, lat, params):
        from .sector import SectorEngine

        super().__init__(lat, params)
        self.n_qubits = lat.n_sites
        self.engine = SectorEngine(lat, params)

    def prepare(self, bits):
        return self.engine.prepare(bits)

    def step(self, state):
        return self.engine.step(state)

    def drive(self, state, qubit, target, p, rng, coin_p):
        if not rng.uniform() < coin_p:
            return DriveEvent(qubit, 0, -1, target), state
        bit, state = self.engine.measure_reset(state, qubit, target, rng)
        return DriveEvent(qubit, 1, bit, target), state

    def to_statevector(self, state):
        return self.engine.to_statevector(state)

    def check_norm(self, state):
        n = self.engine.norm(state)
        if not abs(n - 1.0) <= 1e-10:
            raise NumericalIntegrityError(f"state norm drifted to {n!r}")

    def densities(self, state):
        return self.engine.densities(state)

    def currents(self, state):
        return self.engine.currents(state)


class _ExactBackend(_Backend):
    """Dense ``exp(-i H dt)`` per period instead of the Trotter circuit."""

    name = "exact"

    def __init__(self, lat, params):
        super().__init__(lat, params)
        self.n_qubits = lat.n_sites
        if lat.n_sites > 12:
            raise ConfigError("exact propagation is limited to 12 sites")
        h = qubit_hamiltonian(lat, params).toarray()
        self.unitary = sla.expm(-1j * params.dt * h)

    def step(self, state):
        state.amplitudes = np.ascontiguousarray(self.unitary @ state.amplitudes)
        return state


class _DKBackend(_Backend):
    """Gate-by-gate compact encoding on 18 qubits."""

    name = "dk"

    def __init__(self, lat, params):
        from .fermions import DKEncoding

        super().__init__(lat, params)
        self.enc = DKEncoding(lat)
        self.n_qubits = self.enc.n_qubits
        self.sequence = self.enc.trotter_step(params)
        self._current_terms = [self.enc.current_terms(b, params.phi, params.J) for b in lat.bonds]

    def prepare(self, bits):
        state = super().prepare(bits)
        return self.enc.ancilla_preparation().apply(state)

    def step(self, state):
        return self.sequence.apply(state)

    def currents(self, state):
        from .fermions import expect_terms

        return np.array([expect_terms(state, t) for t in self._current_terms])


ENGINES = ("sector", "dense")


def make_backend(lat: LatticeSpec, params: ModelParams, encoding: str | None = None,
                 propagation: str = "trotter", engine: str = "sector") -> _Backend:
    """Pick the propagation backend.

    ``encoding`` is ``"hcb"``, ``"jw"`` or ``"dk"`` (default from the statistics);
    ``engine`` chooses between the fixed-number and full-register kernels for
    the first two.
    """
    if propagation == "exact":
        return _ExactBackend(lat, params)
    if propagation != "trotter":
        raise ConfigError(f"unknown propagation {propagation!r}")
    enc = encoding or ("jw" if params.fermionic else "hcb")
    if enc == "dk":
        if not params.fermionic:
            raise ConfigError("the compact encoding is for fermions")
        return _DKBackend(lat, params)
    if enc not in ("hcb", "jw"):
        raise ConfigError(f"unknown encoding {enc!r}")
    if (enc == "jw") != params.fermionic:
        raise ConfigError(f"encoding {enc!r} does not match statistics {params.statistics!r}")
    if engine == "sector":
        return _SectorBackend(lat, params)
    if engine == "dense":
        return _DenseBackend(lat, params)
    raise ConfigError(f"unknown engine {engine!r}")


def initial_bits(params: ModelParams, lat: LatticeSpec, rng: RngStream) -> tuple:
    """Initial product-state bitstring.

    ``random_product`` fixes the source to 1 and the drain to 0 and draws one
    uniform per remaining site in index order (Hadamard then measure).
    ``biased`` draws one uniform per site with the ``R_Y`` fill probability of
    the target density.  ``bitstring`` draws nothing.
    """
    n_sites = lat.n_sites
    if params.init == "bitstring":
        bits = tuple(int(b) for b in params.init_bits)
        if len(bits) != n_sites:
            raise ConfigError("init_bits length does not match the lattice")
        return bits
    if params.init == "biased":
        dens = params.init_densities
        if len(dens) != n_sites:
            raise ConfigError("init_densities length does not match the lattice")
        return tuple(1 if rng.uniform() < fill_probability(coin_angle(float(d))) else 0 for d in dens)
    fixed = {lat.source: 1, lat.drain: 0}
    return tuple(fixed[i] if i in fixed else (1 if rng.uniform() < P_HALF else 0) for i in range(n_sites))


def final_shot(state: StateVector, n_sites: int, rng: RngStream, basis: str, lat: LatticeSpec,
               params: ModelParams, encoding: str) -> tuple:
    """Sample one bitstring of the site qubits.

    ``basis`` is ``"density"`` (Z on every site in index order) or
    ``"current:<sector>"``, which measures the sector's bonds one at a time
    through their current gadgets and then the remaining sites.
    """
    if basis.startswith("current:"):
        from .observables import measure_current_sector

        sector = basis.split(":", 1)[1]
        if sector not in lat.sectors:
            raise ConfigError(f"unknown sector {sector!r}")
        bits, _ = measure_current_sector(state, lat, sector, params, rng, encoding)
        return bits
    if basis != "density":
        raise ConfigError(f"unknown measurement basis {basis!r}")
    work = state.copy()
    bits = []
    for q in range(n_sites):
        b, work = qsim.measure(work, q, rng)
        bits.append(b)
    return tuple(bits)


def run_trajectory(params: ModelParams, lat: LatticeSpec, rng: RngStream, *, encoding: str | None = None,
                   propagation: str = "trotter", measurement: str | None = None, observe: str = "final",
                   engine: str = "sector", backend: _Backend | None = None,
                   check_norm: bool = True, return_state: bool = True) -> tuple[TrajectoryRecord, StateVector]:
    """Simulate one trajectory.

    Args:
        observe: ``"final"`` records exact densities/currents after the last
            period, ``"every"`` after every period, ``"densities"`` densities
            every period and currents at the end, ``"none"`` nothing.
        measurement: optional final shot, ``"density"`` or ``"current:<sector>"``.

    Returns:
        The record and the state after the last period (before any final shot).
    """
    be = backend or make_backend(lat, params, encoding, propagation, engine)
    enc = encoding or ("jw" if params.fermionic else "hcb")
    m = params.m
    bits = initial_bits(params, lat, rng)
    state = be.prepare(bits)
    coins = np.zeros((m, 2), dtype=np.int8)
    pre = np.full((m, 2), -1, dtype=np.int8)
    dens = np.zeros((m + 1, lat.n_sites)) if observe in ("every", "densities") else None
    curr = np.zeros((m + 1, len(lat.bonds))) if observe == "every" else None
    if dens is not None:
        dens[0] = be.densities(state)
    if curr is not None:
        curr[0] = be.currents(state)
    cp = fill_probability(coin_angle(params.p))
    for t in range(m):
        state = be.step(state)
        ev, state = be.drive(state, lat.source, 1, params.p, rng, cp)
        coins[t, 0], pre[t, 0] = ev.coin, ev.pre_bit
        ev, state = be.drive(state, lat.drain, 0, params.p, rng, cp)
        coins[t, 1], pre[t, 1] = ev.coin, ev.pre_bit
        if dens is not None:
            dens[t + 1] = be.densities(state)
        if curr is not None:
            curr[t + 1] = be.currents(state)
    if check_norm:
        be.check_norm(state)
    if observe == "final":
        dens = be.densities(state)[None, :]
        curr = be.currents(state)[None, :]
    elif observe == "densities":
        curr = be.currents(state)[None, :]
    rec = TrajectoryRecord(rng.seed, rng.stream_id, bits, coins, pre, densities=dens, currents=curr)
    if measurement is not None or return_state:
        sv = be.to_statevector(state)
    if measurement is not None:
        rec.final_basis = measurement
        rec.final_bits = final_shot(sv, lat.n_sites, rng, measurement, lat, params, enc)
    return rec, (sv if return_state else None)


# --- ensembles ---------------------------------------------------------------


@dataclass
class Ensemble:
    """Per-trajectory observables of a batch of trajectories."""

    params: ModelParams
    lattice: LatticeSpec
    seed: int
    densities: np.ndarray  # (n, m + 1, N) or (n, 1, N)
    currents: np.ndarray  # (n, m + 1, n_bonds) or (n, 1, n_bonds)
    coins: np.ndarray  # (n, m, 2)
    pre_bits: np.ndarray  # (n, m, 2)
    final_bits: np.ndarray | None = None
    records: list = field(default_factory=list)

    @property
    def n_trajectories(self) -> int:
        return self.densities.shape[0]

    def merge(self, other: "Ensemble") -> "Ensemble":
        cat = lambda a, b: np.concatenate([a, b]) if a is not None and b is not None else None  # noqa: E731
        return Ensemble(self.params, self.lattice, self.seed, cat(self.densities, other.densities),
                        cat(self.currents, other.currents), cat(self.coins, other.coins),
                        cat(self.pre_bits, other.pre_bits), cat(self.final_bits, other.final_bits),
                        self.records + other.records)


def run_ensemble(params: ModelParams, lat: LatticeSpec, n_trajectories: int, seed: int, *,
                 encoding: str | None = None, propagation: str = "trotter", observe: str = "densities",
                 measurement: str | None = None, first_stream: int = 0, keep_records: bool = False,
                 engine: str = "sector", progress=None) -> Ensemble:
    """Run trajectories with stream ids ``first_stream, first_stream + 1, ...``."""
    if n_trajectories < 1:
        raise ConfigError("need at least one trajectory")
    be = make_backend(lat, params, encoding, propagation, engine)
    dens, curr, coins, pre, shots, recs = [], [], [], [], [], []
    for n in range(n_trajectories):
        rng = RngStream(seed, first_stream + n)
        rec, _ = run_trajectory(params, lat, rng, encoding=encoding, propagation=propagation,
                                measurement=measurement, observe=observe, backend=be, return_state=False)
        dens.append(rec.densities)
        curr.append(rec.currents)
        coins.append(rec.coins)
        pre.append(rec.pre_bits)
        if measurement is not None:
            shots.append(rec.final_bits)
        if keep_records:
            recs.append(rec)
        if progress is not None:
            progress(n + 1)
    return Ensemble(params, lat, seed, np.array(dens), np.array(curr), np.array(coins), np.array(pre),
                    np.array(shots, dtype=np.int8) if shots else None, recs)


# --- currents from drive statistics -------------------------------------------------


def rolling_mean(x: np.ndarray, window: int = 3, axis: int = -1) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` entries average what is available."""
    x = np.moveaxis(np.asarray(x, dtype=float), axis, -1)
    c = np.cumsum(x, axis=-1)
    out = np.empty_like(x)
    for t in range(x.shape[-1]):
        lo = max(0, t - window + 1)
        out[..., t] = (c[..., t] - (c[..., lo - 1] if lo > 0 else 0.0)) / (t - lo + 1)
    return np.moveaxis(out, -1, axis)


def net_current_from_records(coins: np.ndarray, pre_bits: np.ndarray, dt: float, window: int = 3) -> dict:
    """Inflow and outflow per period from mid-circuit drive events.

    Inflow at period t is the fraction of trajectories whose source coin fired
    on an empty source, divided by ``dt``; outflow likewise counts drain events
    that removed a particle.  Rolling means use a trailing ``window`` and the
    standard errors are taken over trajectories of the windowed per-trajectory
    series.
    """
    coins = np.asarray(coins)
    pre = np.asarray(pre_bits)
    inflow = ((coins[:, :, 0] == 1) & (pre[:, :, 0] == 0)).astype(float) / dt
    outflow = ((coins[:, :, 1] == 1) & (pre[:, :, 1] == 1)).astype(float) / dt
    n = inflow.shape[0]
    res = {}
    for name, x in (("inflow", inflow), ("outflow", outflow)):
        r = rolling_mean(x, window, axis=1)
        res[name] = x.mean(axis=0)
        res[name + "_rolling"] = r.mean(axis=0)
        res[name + "_rolling_stderr"] = r.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(r.shape[1])
    return res


def records_to_arrays(records: list[TrajectoryRecord]) -> tuple[np.ndarray, np.ndarray]:
    return np.array([r.coins for r in records]), np.array([r.pre_bits for r in records])
