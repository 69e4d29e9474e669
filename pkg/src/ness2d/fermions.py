"""Fermionic encodings of the 4x4 lattice.

Derby-Klassen style compact encoding: 16 site qubits plus two ancillas placed
in the faces (1, 0) and (1, 2).  The vertex operator of site ``j`` is ``Z_j``
and each elementary oriented edge ``i -> j`` maps to ``X_i Y_j`` times an
ancilla Pauli (``X`` on vertical, ``Y`` on horizontal edges of an ancilla
face).  The elementary edges form a directed snake

    12 -> 13 -> 14 -> 15 -> 11 -> 10 -> 9 -> 8 -> 4 -> 5 -> 6 -> 7 -> 3 -> 2 -> 1 -> 0

(with 7 -> 11 closing the middle ring), completed by the ancilla edges
5 -> 1, 2 -> 6, 13 -> 9 and 10 -> 14.  The six remaining bonds are composite
products of three neighbouring edges.  The loop around the central face is the
stabiliser ``(prod_{j=4..11} Z_j) Y_a Y_b``; every other face multiplies to the
identity once the edges (5, 6) and (13, 14) carry an extra minus sign.

Bond terms act as ``s Q (x) B_jk`` where ``B_jk`` is the hard-core-boson form on
the two sites and ``s Q`` the dressing read off the mapped edge operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qsim
from .lattice import SECTOR_ORDER, Bond, LatticeSpec, peierls_phase, plaquettes
from .model import Gate, GateSequence, ModelParams, bond_gadget, jw_string_mask
from .qsim import PauliString

ANCILLA_A = 16
ANCILLA_B = 17

# (tail, head, ancilla qubit or None, ancilla Pauli)
_ELEMENTARY = [
    (1, 0, None, None), (2, 1, ANCILLA_A, "Y"), (3, 2, None, None),
    (4, 5, None, None), (5, 6, ANCILLA_A, "Y"), (6, 7, None, None),
    (9, 8, None, None), (10, 9, ANCILLA_B, "Y"), (11, 10, None, None),
    (12, 13, None, None), (13, 14, ANCILLA_B, "Y"), (14, 15, None, None),
    (5, 1, ANCILLA_A, "X"), (2, 6, ANCILLA_A, "X"), (13, 9, ANCILLA_B, "X"),
    (10, 14, ANCILLA_B, "X"), (8, 4, None, None), (7, 11, None, None),
]
# composite edge -> path of elementary edges (product taken with a minus sign)
_COMPOSITE = {
    (4, 0): [(4, 5), (5, 1), (1, 0)],
    (3, 7): [(3, 2), (2, 6), (6, 7)],
    (9, 5): [(9, 8), (8, 4), (4, 5)],
    (6, 10): [(6, 7), (7, 11), (11, 10)],
    (12, 8): [(12, 13), (13, 9), (9, 8)],
    (11, 15): [(11, 10), (10, 14), (14, 15)],
}
_FLIPPED = {(5, 6), (13, 14)}
CENTRAL_FACE = (5, 6, 10, 9)


@dataclass(frozen=True)
class BondDressing:
    """Mapped bond term ``sign * Q (x) B_jk``; ``Q`` excludes sites j and k."""

    bond: Bond
    sign: int
    dressing: PauliString


class DKEncoding:
    """Compact encoding of the 4x4 lattice on 18 qubits."""

    n_qubits = 18

    def __init__(self, lat: LatticeSpec):
        if (lat.width, lat.height) != (4, 4):
            raise ValueError("the compact encoding is laid out for the 4x4 lattice only")
        self.lattice = lat
        self._edges: dict[tuple[int, int], PauliString] = {}
        for tail, head, anc, pauli in _ELEMENTARY:
            labels = {tail: "X", head: "Y"}
            if anc is not None:
                labels[anc] = pauli
            e = PauliString.from_labels(labels)
            if (tail, head) in _FLIPPED:
                e = -e
            self._edges[(tail, head)] = e
        for (i, j), path in _COMPOSITE.items():
            e = PauliString()
            for step in path:
                e = e * self._edges[step]
            self._edges[(i, j)] = -e
        if len(self._edges) != len(lat.bonds):
            raise AssertionError("edge table does not cover the lattice")

    def edge_operator(self, i: int, j: int) -> PauliString:
        """Mapped ``E_ij`` with ``E_ji = -E_ij``."""
        if (i, j) in self._edges:
            return self._edges[(i, j)]
        if (j, i) in self._edges:
            return -self._edges[(j, i)]
        raise KeyError(f"({i}, {j}) is not a bond")

    def vertex_operator(self, i: int) -> PauliString:
        return PauliString.single(i, "Z")

    def arrow(self, bond: Bond) -> tuple[int, int]:
        """Orientation (tail, head) of the stored edge operator."""
        return (bond.j, bond.k) if (bond.j, bond.k) in self._edges else (bond.k, bond.j)

    def loop_product(self, cycle) -> PauliString:
        """``prod (i E_{c_n, c_{n+1}})`` around a closed cycle of sites."""
        out = PauliString()
        cyc = list(cycle) + [cycle[0]]
        for a, b in zip(cyc[:-1], cyc[1:]):
            out = out * self.edge_operator(a, b).scale(1j)
        return out

    def stabilizer(self) -> PauliString:
        return self.loop_product(CENTRAL_FACE)

    def face_loops(self) -> dict[tuple, PauliString]:
        return {f: self.loop_product(f) for f in plaquettes(self.lattice)}

    def dressing(self, bond: Bond) -> BondDressing:
        tail, head = self.arrow(bond)
        e = self._edges[(tail, head)]
        lab = e.labels()
        if lab.get(tail) != "X" or lab.get(head) != "Y":
            raise AssertionError(f"edge {tail}->{head} is not of the X_t Y_h Q form")
        q = e.without([tail, head])
        sign = int(q.coefficient.real)
        return BondDressing(bond, sign, PauliString.from_labels(q.labels()))

    # --- operators in Pauli form -----------------------------------------

    def hopping_terms(self, bond: Bond, phi: float) -> list[tuple[complex, PauliString]]:
        """Pauli expansion of ``e^{i theta} c_j^dag c_k + h.c.``."""
        return _dress(hcb_hopping_terms(bond, phi), self.dressing(bond))

    def current_terms(self, bond: Bond, phi: float, J: float = 1.0) -> list[tuple[complex, PauliString]]:
        return _dress(hcb_current_terms(bond, phi, J), self.dressing(bond))

    # --- circuits ----------------------------------------------------------

    def bond_gates(self, bond: Bond, params: ModelParams) -> list[Gate]:
        d = self.dressing(bond)
        basis, sigma = _basis_change(d.dressing)
        cz = [Gate("cz", (q, bond.j), (), "dress") for q in d.dressing.support]
        core = bond_gadget(bond.j, bond.k, peierls_phase(bond, params.phi), params.J, params.V,
                           params.dt, sign=d.sign * sigma)
        undo = GateSequence(self.n_qubits, list(basis)).inverse().gates
        return basis + cz + core + cz + undo

    def trotter_step(self, params: ModelParams) -> GateSequence:
        seq = GateSequence(self.n_qubits)
        for name in SECTOR_ORDER:
            for b in self.lattice.sector_bonds(name):
                seq.extend(self.bond_gates(b, params))
        return seq

    def ancilla_preparation(self) -> GateSequence:
        """Put the ancillas into the +1 eigenspace of the stabiliser.

        Acts after the site qubits hold a computational basis state: a Bell pair
        on (a, b) picks up ``(-1)^{N_ring}`` through CZs to the ring sites so that
        ``Y_a Y_b`` matches ``prod Z`` over the ring.
        """
        a, b = ANCILLA_A, ANCILLA_B
        seq = GateSequence(self.n_qubits)
        seq.append("h", (a,))
        seq.append("h", (b,))
        seq.append("cz", (a, b))
        seq.append("h", (b,))
        seq.append("z", (a,))
        for j in range(4, 12):
            seq.append("cz", (a, j))
        return seq


def _basis_change(q: PauliString) -> tuple[list[Gate], int]:
    """Single-qubit Cliffords taking the label form of ``q`` to a Z string."""
    gates = []
    for qubit, p in sorted(q.labels().items()):
        if p == "X":
            gates.append(Gate("h", (qubit,)))
        elif p == "Y":
            gates += [Gate("sdg", (qubit,)), Gate("h", (qubit,))]
    return gates, 1


def hcb_hopping_terms(bond: Bond, phi: float) -> list[tuple[complex, PauliString]]:
    """``e^{i theta} s+_j s-_k + h.c. = 1/2 [cos(XX + YY) - sin(XY - YX)]``."""
    th = peierls_phase(bond, phi)
    j, k = bond.j, bond.k
    c, s = np.cos(th), np.sin(th)
    return [
        (0.5 * c, PauliString.from_labels({j: "X", k: "X"})),
        (0.5 * c, PauliString.from_labels({j: "Y", k: "Y"})),
        (-0.5 * s, PauliString.from_labels({j: "X", k: "Y"})),
        (0.5 * s, PauliString.from_labels({j: "Y", k: "X"})),
    ]


def hcb_current_terms(bond: Bond, phi: float, J: float = 1.0) -> list[tuple[complex, PauliString]]:
    """``-i J (e^{i theta} s+_j s-_k - h.c.) = J/2 [sin(XX + YY) + cos(XY - YX)]``."""
    th = peierls_phase(bond, phi)
    j, k = bond.j, bond.k
    c, s = np.cos(th), np.sin(th)
    return [
        (0.5 * J * s, PauliString.from_labels({j: "X", k: "X"})),
        (0.5 * J * s, PauliString.from_labels({j: "Y", k: "Y"})),
        (0.5 * J * c, PauliString.from_labels({j: "X", k: "Y"})),
        (-0.5 * J * c, PauliString.from_labels({j: "Y", k: "X"})),
    ]


def _dress(terms, d: BondDressing):
    return [(c * d.sign, p * d.dressing) for c, p in terms]


def expect_terms(state: qsim.StateVector, terms) -> float:
    return float(sum(c * p.expectation(state) for c, p in terms).real)


def terms_matrix(terms, n_qubits: int) -> np.ndarray:
    return sum(c * p.to_matrix(n_qubits) for c, p in terms)


# --- Jordan-Wigner reference -----------------------------------------------


class JordanWignerEncoding:
    """Row-major Jordan-Wigner encoding on ``n_sites`` qubits."""

    def __init__(self, lat: LatticeSpec):
        self.lattice = lat
        self.n_qubits = lat.n_sites

    def string(self, bond: Bond) -> PauliString:
        mask = jw_string_mask(bond)
        return PauliString(0, mask, 0)

    def dressing(self, bond: Bond) -> BondDressing:
        return BondDressing(bond, 1, self.string(bond))

    def majorana(self, i: int, kind: str = "x") -> PauliString:
        labels = {q: "Z" for q in range(i)}
        labels[i] = "X" if kind == "x" else "Y"
        return PauliString.from_labels(labels)

    def edge_operator(self, i: int, j: int) -> PauliString:
        """``-i gamma_i gamma_j`` built from the x-type Majoranas."""
        return (self.majorana(i) * self.majorana(j)).scale(-1j)

    def hopping_terms(self, bond: Bond, phi: float):
        return _dress(hcb_hopping_terms(bond, phi), self.dressing(bond))

    def current_terms(self, bond: Bond, phi: float, J: float = 1.0):
        return _dress(hcb_current_terms(bond, phi, J), self.dressing(bond))

    def bond_gates(self, bond: Bond, params: ModelParams) -> list[Gate]:
        cz = [Gate("cz", (q, bond.j), (), "dress") for q in self.string(bond).support]
        core = bond_gadget(bond.j, bond.k, peierls_phase(bond, params.phi), params.J, params.V, params.dt)
        return cz + core + cz

    def trotter_step(self, params: ModelParams) -> GateSequence:
        seq = GateSequence(self.n_qubits)
        for name in SECTOR_ORDER:
            for b in self.lattice.sector_bonds(name):
                seq.extend(self.bond_gates(b, params))
        return seq


def build_fermion_trotter_step(lat: LatticeSpec, params: ModelParams, encoding: str = "dk") -> GateSequence:
    enc = DKEncoding(lat) if encoding == "dk" else JordanWignerEncoding(lat)
    return enc.trotter_step(params)
