"""Model parameters, gate sequences and Trotter circuits for the bosonic model.

The Hamiltonian is

    H = -J sum_<jk> (e^{i theta_jk} c_j^dag c_k + h.c.) + V sum_<jk> n_j n_k

with the Peierls phase ``theta_jk`` from :func:`ness2d.lattice.peierls_phase`.
One Trotter step applies the four bond sectors in the order red, green, blue,
yellow; each bond is the gadget

    R_Z(-t) x R_Z(t) . TK2(a, a, g) . R_Z(t) x R_Z(-t) . R_Z(-g) x R_Z(-g)

with ``t = theta / 2 pi``, ``a = -J dt / pi`` and ``g = V dt / 2 pi`` (turns).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import qsim
from .lattice import SECTOR_ORDER, Bond, LatticeSpec, peierls_phase

STATISTICS = ("hcb", "fermion")
INIT_KINDS = ("random_product", "bitstring", "biased")
ANGLE_EPS = 1e-15


class ConfigError(ValueError):
    """Invalid model or run configuration."""


@dataclass(frozen=True)
class ModelParams:
    """Physical and discretisation parameters of one driven-lattice run.

    Attributes:
        J: hopping amplitude.
        V: nearest-neighbour interaction.
        phi: flux per plaquette (Peierls phase ``y * phi`` on horizontal bonds).
        dt: Trotter time step.
        m: number of periods (Trotter step + drive).
        gamma: drive rate; the Kraus probability is ``p = gamma * dt``.
        statistics: ``"hcb"`` (hard-core bosons) or ``"fermion"``.
        init: ``"random_product"``, ``"bitstring"`` or ``"biased"``.
        init_bits: occupation pattern for ``init="bitstring"``.
        init_densities: per-site fill probabilities for ``init="biased"``.
    """

    J: float = 1.0
    V: float = 0.0
    phi: float = 0.0
    dt: float = 0.31
    m: int = 10
    gamma: float = 2.0
    statistics: str = "hcb"
    init: str = "random_product"
    init_bits: tuple | None = None
    init_densities: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.statistics not in STATISTICS:
            raise ConfigError(f"statistics must be one of {STATISTICS}, got {self.statistics!r}")
        if self.init not in INIT_KINDS:
            raise ConfigError(f"init must be one of {INIT_KINDS}, got {self.init!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.m < 0:
            raise ConfigError("m must be non-negative")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if self.gamma * self.dt > 1.0 + 1e-12:
            raise ConfigError(f"Kraus probability p = gamma * dt = {self.gamma * self.dt:.4g} exceeds 1")
        if self.init == "bitstring" and self.init_bits is None:
            raise ConfigError("init='bitstring' needs init_bits")
        if self.init == "biased" and self.init_densities is None:
            raise ConfigError("init='biased' needs init_densities")

    @property
    def p(self) -> float:
        return min(self.gamma * self.dt, 1.0)

    @property
    def fermionic(self) -> bool:
        return self.statistics == "fermion"

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = {
            "J": self.J, "V": self.V, "phi": self.phi, "dt": self.dt, "m": self.m,
            "gamma": self.gamma, "p": self.p, "statistics": self.statistics, "init": self.init,
        }
        if self.init_bits is not None:
            d["init_bits"] = list(self.init_bits)
        if self.init_densities is not None:
            d["init_densities"] = list(self.init_densities)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {"J", "V", "phi", "dt", "m", "gamma", "statistics", "init", "init_bits", "init_densities"}
        unknown = set(d) - known - {"p"}
        if unknown:
            raise ConfigError(f"unknown parameter(s): {sorted(unknown)}")
        kw = {k: d[k] for k in known if k in d}
        if "p" in d and "gamma" not in d:
            kw["gamma"] = float(d["p"]) / float(d.get("dt", cls.dt))
        for key in ("init_bits", "init_densities"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def coin_angle(p: float) -> float:
    """R_Y angle (turns) that sets a fresh qubit to ``|1>`` with probability ``p``."""
    return 2.0 / math.pi * math.asin(math.sqrt(min(max(p, 0.0), 1.0)))


def fill_probability(t: float) -> float:
    """Born weight of ``|1>`` after ``R_Y(t)|0>``, evaluated exactly as the simulator does."""
    return float(abs(qsim.ry_matrix(t)[1, 0]) ** 2)


# --- gate sequences -----------------------------------------------------


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple
    params: tuple = ()
    tag: str = ""

    def matrix(self) -> np.ndarray:
        return qsim.gate_matrix(self.kind, self.params)


@dataclass
class GateSequence:
    """Ordered list of native gates on ``n_qubits`` qubits (first gate acts first)."""

    n_qubits: int
    gates: list = field(default_factory=list)

    def append(self, kind, qubits, params=(), tag=""):
        self.gates.append(Gate(kind, tuple(qubits), tuple(float(p) for p in params), tag))

    def extend(self, other: "GateSequence | list") -> None:
        self.gates.extend(other.gates if isinstance(other, GateSequence) else other)

    def __iter__(self):
        return iter(self.gates)

    def __len__(self):
        return len(self.gates)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def apply(self, state: qsim.StateVector) -> qsim.StateVector:
        for g in self.gates:
            state = qsim.apply_gate(state, g.kind, g.qubits, g.params)
        return state

    def inverse(self) -> "GateSequence":
        inv = GateSequence(self.n_qubits)
        for g in reversed(self.gates):
            inv.gates.append(_inverse_gate(g))
        return inv

    def to_matrix(self) -> np.ndarray:
        """Dense unitary (only sensible for a handful of qubits)."""
        dim = 1 << self.n_qubits
        cols = []
        for b in range(dim):
            cols.append(self.apply(qsim.StateVector.basis(self.n_qubits, b)).amplitudes)
        return np.array(cols).T


def _inverse_gate(g: Gate) -> Gate:
    if g.kind in ("rx", "ry", "rz", "tk2"):
        return Gate(g.kind, g.qubits, tuple(-p for p in g.params), g.tag)
    if g.kind == "s":
        return Gate("sdg", g.qubits, (), g.tag)
    if g.kind == "sdg":
        return Gate("s", g.qubits, (), g.tag)
    return g


def bond_gadget(j: int, k: int, theta: float, J: float, V: float, dt: float, sign: int = 1) -> list[Gate]:
    """Gates implementing ``exp(-i dt h_jk)`` on qubits ``(j, k)`` up to a global phase.

    ``sign=-1`` flips the hopping amplitude (the tilde variant of the bond gate).
    Rotations with vanishing angle are omitted.
    """
    t = theta / (2 * math.pi)
    a = -sign * J * dt / math.pi
    g = V * dt / (2 * math.pi)
    gates = []
    if abs(t) > ANGLE_EPS:
        gates += [Gate("rz", (j,), (-t,), "flux"), Gate("rz", (k,), (t,), "flux")]
    gates.append(Gate("tk2", (j, k), (a, a, g), "bond"))
    if abs(t) > ANGLE_EPS:
        gates += [Gate("rz", (j,), (t,), "flux"), Gate("rz", (k,), (-t,), "flux")]
    if abs(g) > ANGLE_EPS:
        gates += [Gate("rz", (j,), (-g,), "int"), Gate("rz", (k,), (-g,), "int")]
    return gates


def local_unitary(gates: list[Gate], j: int, k: int) -> np.ndarray:
    """4x4 product of gates acting only on ``(j, k)``; ``j`` is the high local bit."""
    u = np.eye(4, dtype=complex)
    for g in gates:
        m = g.matrix()
        if g.qubits == (j,):
            m = np.kron(m, qsim.I2)
        elif g.qubits == (k,):
            m = np.kron(qsim.I2, m)
        elif g.qubits == (k, j):
            sw = np.eye(4)[[0, 2, 1, 3]]
            m = sw @ m @ sw
        elif g.qubits != (j, k):
            raise ValueError(f"gate on {g.qubits} outside ({j}, {k})")
        u = m @ u
    return u


def bond_unitary(bond: Bond, params: ModelParams, sign: int = 1) -> np.ndarray:
    theta = peierls_phase(bond, params.phi)
    gates = bond_gadget(bond.j, bond.k, theta, params.J, params.V, params.dt, sign)
    return local_unitary(gates, bond.j, bond.k)


def build_hcb_trotter_step(lat: LatticeSpec, params: ModelParams) -> GateSequence:
    seq = GateSequence(lat.n_sites)
    for name in SECTOR_ORDER:
        for b in lat.sector_bonds(name):
            seq.extend(bond_gadget(b.j, b.k, peierls_phase(b, params.phi), params.J, params.V, params.dt))
    return seq


# --- compiled bond programs (fast path) -----------------------------------


@dataclass
class BondProgram:
    """Arrays consumed by the compiled Trotter kernel."""

    q1: np.ndarray
    q2: np.ndarray
    masks: np.ndarray
    u_even: np.ndarray
    u_odd: np.ndarray

    def apply(self, psi: np.ndarray) -> None:
        from . import _kernels

        _kernels.apply_bond_program(psi, self.q1, self.q2, self.masks, self.u_even, self.u_odd)


def jw_string_mask(bond: Bond) -> int:
    """Qubits strictly between the two ends in row-major Jordan-Wigner order."""
    mask = 0
    for q in range(bond.j + 1, bond.k):
        mask |= 1 << q
    return mask


def compile_bond_program(lat: LatticeSpec, params: ModelParams, jordan_wigner: bool | None = None) -> BondProgram:
    """One Trotter step as a list of fused bond unitaries.

    With ``jordan_wigner`` the hopping sign is flipped on odd string parity,
    which is the row-major Jordan-Wigner image of the fermionic bond term.
    """
    jw = params.fermionic if jordan_wigner is None else jordan_wigner
    q1, q2, masks, ue, uo = [], [], [], [], []
    for name in SECTOR_ORDER:
        for b in lat.sector_bonds(name):
            q1.append(b.j)
            q2.append(b.k)
            mask = jw_string_mask(b) if jw else 0
            masks.append(mask)
            ue.append(bond_unitary(b, params, +1))
            uo.append(bond_unitary(b, params, -1) if mask else ue[-1])
    blocks = np.ones((4, 4), dtype=bool)
    blocks[1:3, 1:3] = False
    blocks[0, 0] = blocks[3, 3] = False
    for u in ue + uo:
        if np.abs(u[blocks]).max() > 1e-13:
            raise ValueError("bond unitary does not conserve particle number")
    return BondProgram(
        np.array(q1, dtype=np.int64), np.array(q2, dtype=np.int64), np.array(masks, dtype=np.int64),
        np.ascontiguousarray(ue, dtype=np.complex128), np.ascontiguousarray(uo, dtype=np.complex128),
    )


# --- dense Hamiltonians (oracles) -----------------------------------------


def qubit_hamiltonian(lat: LatticeSpec, params: ModelParams, jordan_wigner: bool | None = None,
                      n_qubits: int | None = None) -> sp.csr_matrix:
    """Sparse qubit Hamiltonian; Jordan-Wigner strings when ``jordan_wigner``."""
    jw = params.fermionic if jordan_wigner is None else jordan_wigner
    n = lat.n_sites if n_qubits is None else n_qubits
    dim = 1 << n
    idx = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []
    diag = np.zeros(dim)
    for b in lat.bonds:
        nj = (idx >> b.j) & 1
        nk = (idx >> b.k) & 1
        diag += params.V * nj * nk
        theta = peierls_phase(b, params.phi)
        # c_j^dag c_k : |j=0, k=1> -> |j=1, k=0>
        src = idx[(nj == 0) & (nk == 1)]
        dst = src ^ (1 << b.j) ^ (1 << b.k)
        amp = np.full(src.shape, -params.J * np.exp(1j * theta), dtype=complex)
        if jw:
            mask = jw_string_mask(b)
            par = np.array([bin(int(s) & mask).count("1") & 1 for s in src])
            amp = amp * (1 - 2 * par)
        rows += [dst, src]
        cols += [src, dst]
        vals += [amp, np.conj(amp)]
    rows.append(idx)
    cols.append(idx)
    vals.append(diag.astype(complex))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))


def number_operator(n_qubits: int, site: int) -> sp.csr_matrix:
    idx = np.arange(1 << n_qubits)
    return sp.diags(((idx >> site) & 1).astype(float)).tocsr()
