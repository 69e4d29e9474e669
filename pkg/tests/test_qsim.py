"""State-vector simulator: gates, measurement, Pauli strings, RNG."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from ness2d import qsim
from ness2d.qsim import PauliString, RngStream, StateVector


def dense(u, qubits, n):
    """Reference embedding of a gate by explicit index arithmetic."""
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    k = len(qubits)
    for col in range(dim):
        local_in = 0
        for pos, q in enumerate(qubits):
            local_in |= ((col >> q) & 1) << (k - 1 - pos)
        for local_out in range(1 << k):
            row = col
            for pos, q in enumerate(qubits):
                bit = (local_out >> (k - 1 - pos)) & 1
                row = (row & ~(1 << q)) | (bit << q)
            out[row, col] += u[local_out, local_in]
    return out


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return StateVector(v / np.linalg.norm(v))


PAULI = {"X": qsim.X, "Y": qsim.Y, "Z": qsim.Z}


@pytest.mark.parametrize("kind,axis", [("rx", "X"), ("ry", "Y"), ("rz", "Z")])
def test_rotation_matches_exponential(kind, axis):
    for t in (0.0, 0.3, -1.7, 2.0):
        want = expm(-1j * math.pi * t / 2 * PAULI[axis])
        np.testing.assert_allclose(qsim.gate_matrix(kind, (t,)), want, atol=1e-14)


def test_tk2_matches_exponential():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b, c = rng.uniform(-2, 2, size=3)
        gen = a * np.kron(qsim.X, qsim.X) + b * np.kron(qsim.Y, qsim.Y) + c * np.kron(qsim.Z, qsim.Z)
        np.testing.assert_allclose(qsim.tk2_matrix(a, b, c), expm(-0.5j * math.pi * gen), atol=1e-13)


def test_tk2_quarter_swaps_single_excitation():
    # TK2(1/2, 1/2, 0) maps |01> to -i|10>
    u = qsim.tk2_matrix(0.5, 0.5, 0.0)
    np.testing.assert_allclose(u[:, 1], [0, 0, -1j, 0], atol=1e-15)
    np.testing.assert_allclose(u[:, 0], [1, 0, 0, 0], atol=1e-15)


def test_rx_half_turn_is_x_up_to_phase():
    np.testing.assert_allclose(qsim.rx_matrix(1.0), -1j * qsim.X, atol=1e-15)


@pytest.mark.parametrize("kind,params,qubits", [
    ("h", (), (2,)), ("s", (), (0,)), ("sdg", (), (3,)), ("x", (), (1,)),
    ("rx", (0.37,), (1,)), ("ry", (-0.81,), (3,)), ("rz", (1.3,), (0,)),
    ("cz", (), (0, 3)), ("tk2", (0.1, -0.4, 0.25), (3, 1)), ("tk2", (0.2, 0.2, 0.7), (0, 2)),
])
def test_apply_gate_matches_dense_embedding(kind, params, qubits):
    n = 4
    psi = random_state(n, 7)
    want = dense(qsim.gate_matrix(kind, params), qubits, n) @ psi.amplitudes
    got = qsim.apply_gate(psi.copy(), kind, qubits, params).amplitudes
    np.testing.assert_allclose(got, want, atol=1e-13)


def test_basis_index_convention():
    psi = StateVector.from_bits([1, 0, 1])
    assert np.argmax(np.abs(psi.amplitudes)) == 0b101
    np.testing.assert_allclose(psi.densities(), [1, 0, 1])


def test_invalid_qubit_rejected():
    with pytest.raises((IndexError, ValueError)):
        qsim.apply_gate(StateVector.zeros(2), "h", (2,))


def test_measure_born_statistics():
    t = 0.4
    p1 = abs(qsim.ry_matrix(t)[1, 0]) ** 2
    rng = RngStream(3)
    n = 100_000
    ones = 0
    for _ in range(n):
        psi = qsim.apply_gate(StateVector.zeros(1), "ry", (0,), (t,))
        bit, _ = qsim.measure(psi, 0, rng)
        ones += bit
    assert abs(ones / n - p1) < 4 * math.sqrt(p1 * (1 - p1) / n)


def test_measure_collapses_and_preserves_product_factor():
    a = qsim.apply_gate(StateVector.zeros(2), "ry", (0,), (0.3,))
    a = qsim.apply_gate(a, "h", (1,))
    bit, post = qsim.measure(a.copy(), 1, RngStream(0))
    assert post.probability_one(1) == pytest.approx(bit)
    assert post.probability_one(0) == pytest.approx(a.probability_one(0), abs=1e-14)
    post.check_norm()


def test_reset_definite_qubit_draws_nothing():
    rng = RngStream(5)
    psi = qsim.reset_to(StateVector.from_bits([1, 0]), 0, 0, rng)
    assert rng.draws == 0
    assert psi.probability_one(0) == 0.0
    psi = qsim.reset_to(qsim.apply_gate(psi, "h", (1,)), 1, 1, rng)
    assert rng.draws == 1 and psi.probability_one(1) == pytest.approx(1.0)


def test_pauli_products_and_phases():
    x = PauliString.single(0, "X")
    y = PauliString.single(0, "Y")
    z = PauliString.single(0, "Z")
    np.testing.assert_allclose((x * y).to_matrix(1), 1j * qsim.Z, atol=1e-15)
    np.testing.assert_allclose((y * z).to_matrix(1), 1j * qsim.X, atol=1e-15)
    assert not x.commutes_with(y)
    xx = PauliString.from_labels({0: "X", 1: "X"})
    yy = PauliString.from_labels({0: "Y", 1: "Y"})
    assert xx.commutes_with(yy)
    assert (xx * xx).is_identity()


def test_pauli_matrix_and_expectation_agree():
    p = PauliString.from_labels({0: "Y", 2: "Z", 3: "X"}, coeff=-1)
    psi = random_state(4, 11)
    want = np.vdot(psi.amplitudes, p.to_matrix(4) @ psi.amplitudes)
    assert p.expectation(psi) == pytest.approx(want, abs=1e-13)
    assert p.is_hermitian()


def test_rng_stream_deterministic_and_independent():
    a = RngStream(42, 3).uniforms(5)
    b = RngStream(42, 3).uniforms(5)
    c = RngStream(42, 4).uniforms(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_norm_after_many_random_gates():
    rng = np.random.default_rng(9)
    n = 6
    psi = StateVector.zeros(n)
    kinds = ["h", "s", "sdg", "rx", "ry", "rz", "cz", "tk2"]
    for _ in range(10_000):
        kind = kinds[rng.integers(len(kinds))]
        if kind in ("cz", "tk2"):
            qubits = tuple(int(q) for q in rng.choice(n, 2, replace=False))
        else:
            qubits = (int(rng.integers(n)),)
        params = {"rx": 1, "ry": 1, "rz": 1, "tk2": 3}.get(kind, 0)
        psi = qsim.apply_gate(psi, kind, qubits, tuple(rng.uniform(-2, 2, params)))
    assert abs(psi.norm() - 1) < 1e-10


def test_check_norm_raises():
    psi = StateVector(np.array([1.0, 1.0]))
    with pytest.raises(qsim.NumericalIntegrityError):
        psi.check_norm()


def test_dump_load_round_trip(tmp_path):
    psi = random_state(3, 2)
    psi.dump(tmp_path / "s.bin")
    np.testing.assert_array_equal(StateVector.load(tmp_path / "s.bin").amplitudes, psi.amplitudes)
