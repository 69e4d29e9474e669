"""Dense state-vector simulation: states, native gates, Pauli strings, RNG streams.

Qubit ``q`` is bit ``q`` of the basis index; ``|0>`` is the Z = +1 eigenstate
and represents an empty site.  Rotation gates follow the turn-normalised
convention ``R_P(t) = exp(-i pi t P / 2)`` and
``TK2(a, b, c) = exp(-i pi / 2 (a XX + b YY + c ZZ))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

# Branches with smaller Born weight than this cannot be renormalised reliably.
UNDERFLOW = 1e-14


class NumericalIntegrityError(RuntimeError):
    """A state lost normalisation or a measurement hit a vanishing branch."""


# --- matrices -----------------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
SDG = np.diag([1, -1j]).astype(complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z}


def rx_matrix(t: float) -> np.ndarray:
    c, s = math.cos(math.pi * t / 2), math.sin(math.pi * t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry_matrix(t: float) -> np.ndarray:
    c, s = math.cos(math.pi * t / 2), math.sin(math.pi * t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(t: float) -> np.ndarray:
    e = np.exp(-0.5j * math.pi * t)
    return np.diag([e, np.conj(e)])


def tk2_matrix(a: float, b: float, c: float) -> np.ndarray:
    """Closed form of TK2 on the local basis ``|q1 q2>``."""
    pa, pb, pc = math.pi * a / 2, math.pi * b / 2, math.pi * c / 2
    u = np.zeros((4, 4), dtype=complex)
    ez = np.exp(-1j * pc)
    ez_ = np.exp(1j * pc)
    # |00>, |11> block: XX - YY couples them
    u[0, 0] = u[3, 3] = ez * math.cos(pa - pb)
    u[0, 3] = u[3, 0] = -1j * ez * math.sin(pa - pb)
    # |01>, |10> block: XX + YY couples them
    u[1, 1] = u[2, 2] = ez_ * math.cos(pa + pb)
    u[1, 2] = u[2, 1] = -1j * ez_ * math.sin(pa + pb)
    return u


GATE_MATRICES_FIXED = {"h": H, "s": S, "sdg": SDG, "x": X, "y": Y, "z": Z, "cz": CZ}


def gate_matrix(kind: str, params: tuple = ()) -> np.ndarray:
    if kind in GATE_MATRICES_FIXED:
        return GATE_MATRICES_FIXED[kind]
    if kind == "rx":
        return rx_matrix(*params)
    if kind == "ry":
        return ry_matrix(*params)
    if kind == "rz":
        return rz_matrix(*params)
    if kind == "tk2":
        return tk2_matrix(*params)
    raise ValueError(f"unknown gate {kind!r}")


# --- state vector -------------------------------------------------------


class StateVector:
    """Pure state of ``n_qubits`` qubits stored as a contiguous complex128 array."""

    def __init__(self, amplitudes: np.ndarray, copy: bool = True):
        amps = np.array(amplitudes, dtype=np.complex128, copy=copy)
        n = int(round(math.log2(amps.shape[0])))
        if amps.ndim != 1 or 1 << n != amps.shape[0]:
            raise ValueError("amplitude vector length must be a power of two")
        self.amplitudes = np.ascontiguousarray(amps)
        self.n_qubits = n

    @classmethod
    def zeros(cls, n_qubits: int) -> "StateVector":
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, copy=False)

    @classmethod
    def from_bits(cls, bits) -> "StateVector":
        index = sum(int(b) << q for q, b in enumerate(bits))
        return cls.basis(len(bits), index)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes, copy=True)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check_norm(self, tol: float = 1e-10) -> None:
        n = self.norm()
        if not abs(n - 1.0) <= tol:
            raise NumericalIntegrityError(f"state norm drifted to {n!r}")

    def probability_one(self, q: int) -> float:
        return float(K.prob_one(self.amplitudes, q))

    def densities(self, n_sites: int | None = None) -> np.ndarray:
        return K.site_densities(self.amplitudes, self.n_qubits if n_sites is None else n_sites)

    def tensor(self, other: "StateVector") -> "StateVector":
        """``self`` on the low qubits, ``other`` on the new high qubits."""
        return StateVector(np.kron(other.amplitudes, self.amplitudes), copy=False)

    def dump(self, path) -> None:
        """Write raw little-endian complex128 amplitudes."""
        self.amplitudes.astype("<c16").tofile(path)

    @classmethod
    def load(cls, path) -> "StateVector":
        return cls(np.fromfile(path, dtype="<c16"), copy=False)

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


def _check_qubit(state: StateVector, *qubits: int) -> None:
    for q in qubits:
        if not 0 <= q < state.n_qubits:
            raise IndexError(f"qubit {q} out of range for {state.n_qubits} qubits")
    if len(set(qubits)) != len(qubits):
        raise ValueError("gate qubits must be distinct")


def apply_1q(state: StateVector, q: int, u: np.ndarray) -> StateVector:
    _check_qubit(state, q)
    K.apply_1q(state.amplitudes, q, np.ascontiguousarray(u, dtype=np.complex128))
    return state


_NO_MASK_DUMMY = np.zeros((4, 4), dtype=np.complex128)


def apply_2q(state: StateVector, q1: int, q2: int, u: np.ndarray) -> StateVector:
    _check_qubit(state, q1, q2)
    u = np.ascontiguousarray(u, dtype=np.complex128)
    K.apply_2q(state.amplitudes, q1, q2, u, u, 0)
    return state


def apply_matrix(state: StateVector, u: np.ndarray, qubits) -> StateVector:
    """Generic k-qubit gate; ``qubits[0]`` is the most significant local bit."""
    qubits = list(qubits)
    if len(qubits) == 1:
        return apply_1q(state, qubits[0], u)
    if len(qubits) == 2:
        return apply_2q(state, qubits[0], qubits[1], u)
    _check_qubit(state, *qubits)
    n = state.n_qubits
    k = len(qubits)
    psi = state.amplitudes.reshape([2] * n)
    axes = [n - 1 - q for q in qubits]
    t = np.tensordot(u.reshape([2] * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    state.amplitudes = np.ascontiguousarray(t.reshape(-1))
    return state


def apply_rx(state, q, t):
    return apply_1q(state, q, rx_matrix(t))


def apply_ry(state, q, t):
    return apply_1q(state, q, ry_matrix(t))


def apply_rz(state, q, t):
    _check_qubit(state, q)
    e = np.exp(-0.5j * math.pi * t)
    K.apply_diag_1q(state.amplitudes, q, e, np.conj(e))
    return state


def apply_tk2(state, q1, q2, a, b, c):
    return apply_2q(state, q1, q2, tk2_matrix(a, b, c))


def apply_h(state, q):
    return apply_1q(state, q, H)


def apply_sdg(state, q):
    return apply_1q(state, q, SDG)


def apply_s(state, q):
    return apply_1q(state, q, S)


def apply_x(state, q):
    _check_qubit(state, q)
    K.flip(state.amplitudes, q)
    return state


def apply_cz(state, q1, q2):
    return apply_2q(state, q1, q2, CZ)


def apply_gate(state: StateVector, kind: str, qubits, params=()) -> StateVector:
    if kind == "rz":
        return apply_rz(state, qubits[0], *params)
    if kind == "x":
        return apply_x(state, qubits[0])
    return apply_matrix(state, gate_matrix(kind, tuple(params)), qubits)


# --- measurement ----------------------------------------------------------


def measure(state: StateVector, q: int, rng: "RngStream") -> tuple[int, StateVector]:
    """Projective Z measurement using one uniform draw: outcome 1 iff ``u < P(1)``."""
    _check_qubit(state, q)
    p1 = min(max(state.probability_one(q), 0.0), 1.0)
    bit = 1 if rng.uniform() < p1 else 0
    weight = p1 if bit else 1.0 - p1
    if weight < UNDERFLOW:
        raise NumericalIntegrityError(f"measurement branch weight {weight:.3e} on qubit {q}")
    K.collapse(state.amplitudes, q, bit, math.sqrt(weight))
    return bit, state


def reset_to(state: StateVector, q: int, bit: int, rng: "RngStream | None" = None) -> StateVector:
    """Measure qubit ``q`` then flip it if needed so that it ends in ``|bit>``.

    When the qubit is already in a definite state no randomness is consumed.
    """
    p1 = state.probability_one(q)
    if p1 < UNDERFLOW or 1.0 - p1 < UNDERFLOW:
        current = 1 if p1 > 0.5 else 0
    else:
        if rng is None:
            raise ValueError("resetting a superposed qubit requires an rng")
        current, state = measure(state, q, rng)
    if current != bit:
        K.flip(state.amplitudes, q)
    return state


# --- Pauli strings --------------------------------------------------------

_LABEL_BITS = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


@dataclass(frozen=True)
class PauliString:
    """``i^phase * prod_q X_q^{x_q} Z_q^{z_q}`` stored as bit masks.

    With this ordering ``Y = i X Z``, so each Y contributes one to ``phase``
    when built from labels.
    """

    x: int = 0
    z: int = 0
    phase: int = 0

    @classmethod
    def from_labels(cls, labels: dict[int, str], coeff: complex = 1) -> "PauliString":
        x = z = 0
        phase = {1: 0, 1j: 1, -1: 2, -1j: 3}[complex(coeff)]
        for q, p in labels.items():
            if p == "I":
                continue
            bx, bz = _LABEL_BITS[p]
            x |= bx << q
            z |= bz << q
            if p == "Y":
                phase += 1
        return cls(x, z, phase % 4)

    @classmethod
    def single(cls, q: int, label: str) -> "PauliString":
        return cls.from_labels({q: label})

    @property
    def coefficient(self) -> complex:
        """Phase relative to the label form (``Y`` counted as a bare label)."""
        return 1j ** ((self.phase - bin(self.x & self.z).count("1")) % 4)

    def labels(self) -> dict[int, str]:
        out = {}
        support = self.x | self.z
        q = 0
        while support >> q:
            bx, bz = (self.x >> q) & 1, (self.z >> q) & 1
            if bx or bz:
                out[q] = {(1, 0): "X", (1, 1): "Y", (0, 1): "Z"}[(bx, bz)]
            q += 1
        return out

    @property
    def support(self) -> list[int]:
        return sorted(self.labels())

    def __mul__(self, other: "PauliString") -> "PauliString":
        extra = 2 * bin(self.z & other.x).count("1")
        return PauliString(self.x ^ other.x, self.z ^ other.z, (self.phase + other.phase + extra) % 4)

    def __neg__(self) -> "PauliString":
        return PauliString(self.x, self.z, (self.phase + 2) % 4)

    def scale(self, coeff: complex) -> "PauliString":
        return PauliString(self.x, self.z, (self.phase + {1: 0, 1j: 1, -1: 2, -1j: 3}[complex(coeff)]) % 4)

    def commutes_with(self, other: "PauliString") -> bool:
        n = bin(self.x & other.z).count("1") + bin(self.z & other.x).count("1")
        return n % 2 == 0

    def is_hermitian(self) -> bool:
        return self.coefficient in (1, -1)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def without(self, qubits) -> "PauliString":
        """Drop the listed qubits, keeping the label-form coefficient."""
        labels = {q: p for q, p in self.labels().items() if q not in set(qubits)}
        return PauliString.from_labels(labels, self.coefficient)

    def to_matrix(self, n_qubits: int) -> np.ndarray:
        m = np.ones((1, 1), dtype=complex)
        labels = self.labels()
        for q in reversed(range(n_qubits)):
            m = np.kron(m, PAULI_MATRICES[labels.get(q, "I")])
        return self.coefficient * m

    def apply(self, state: StateVector) -> StateVector:
        out = np.empty_like(state.amplitudes)
        K.apply_pauli(state.amplitudes, out, self.x, self.z)
        return StateVector(out * (1j ** self.phase), copy=False)

    def expectation(self, state: StateVector) -> complex:
        return complex(K.pauli_expect(state.amplitudes, self.x, self.z) * (1j ** self.phase))

    def __str__(self) -> str:
        c = self.coefficient
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[c]
        body = " ".join(f"{p}{q}" for q, p in sorted(self.labels().items())) or "I"
        return f"{sign}{body}"


def expect_pauli(state: StateVector, pauli: PauliString) -> complex:
    return pauli.expectation(state)


# --- random streams -------------------------------------------------------


class RngStream:
    """Counter-based (Philox) uniform stream keyed by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self.draws = 0

    def uniform(self) -> float:
        self.draws += 1
        return float(self._gen.random())

    def bernoulli(self, p: float) -> int:
        return 1 if self.uniform() < p else 0

    def uniforms(self, n: int) -> np.ndarray:
        self.draws += n
        return self._gen.random(n)

    def derive_seed(self) -> int:
        """32-bit integer seed for compiled kernels using their own generator."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return int(ss.generate_state(1)[0])
