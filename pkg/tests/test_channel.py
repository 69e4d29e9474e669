"""Drive channel: Kraus map, Lindblad oracle, drive events and trajectories."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from ness2d import qsim
from ness2d.channel import (
    P_HALF, TrajectoryRecord, apply_cptp_step, drain_kraus, drive_site, embed, initial_bits,
    integrate_lindblad, jump_operators, kraus_operators, lindblad_rhs, make_backend, rho_currents,
    rho_densities, run_ensemble, run_trajectory, source_kraus,
)
from ness2d.lattice import build_lattice
from ness2d.model import ConfigError, ModelParams, qubit_hamiltonian
from ness2d.observables import bond_current
from ness2d.qsim import NumericalIntegrityError, RngStream, StateVector


@pytest.fixture(scope="module")
def lat22():
    return build_lattice(2, 2)


def random_rho(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.mark.parametrize("p", np.linspace(0, 1, 11))
def test_kraus_completeness(p):
    for ops in (source_kraus(p), drain_kraus(p), kraus_operators(p)):
        total = sum(k.conj().T @ k for k in ops)
        np.testing.assert_allclose(total, np.eye(total.shape[0]), atol=1e-12)


def test_kraus_rejects_bad_p():
    with pytest.raises(ValueError):
        kraus_operators(1.5)


def test_full_drive_pins_source_and_drain(lat22):
    rho = random_rho(4, 1)
    out = apply_cptp_step(rho, lat22, 1.0, unitary=np.eye(16))
    dens = rho_densities(out, 4)
    assert dens[lat22.source] == pytest.approx(1.0) and dens[lat22.drain] == pytest.approx(0.0, abs=1e-15)
    assert np.trace(out).real == pytest.approx(1.0)


def test_cptp_step_matches_dense_kraus_sum(lat22):
    rho = random_rho(4, 2)
    p = 0.37
    u = expm(-0.3j * qubit_hamiltonian(lat22, ModelParams(V=0.4)).toarray())
    want = np.zeros_like(rho)
    r = u @ rho @ u.conj().T
    for ks in source_kraus(p):
        for kd in drain_kraus(p):
            k = embed(ks, lat22.source, 4) @ embed(kd, lat22.drain, 4)
            want += k @ r @ k.conj().T
    np.testing.assert_allclose(apply_cptp_step(rho, lat22, p, unitary=u), want, atol=1e-14)


def test_lindblad_zero_rate_is_unitary(lat22):
    H = qubit_hamiltonian(lat22, ModelParams(V=1.0, phi=0.3)).toarray()
    psi = np.zeros(16, dtype=complex)
    psi[0b0101] = 1
    rho = np.outer(psi, psi.conj())
    out = integrate_lindblad(rho, H, jump_operators(lat22, 0.0), 1.0, 0.01)
    assert np.trace(out @ out).real == pytest.approx(1.0, abs=1e-8)
    want = expm(-1j * H) @ psi
    np.testing.assert_allclose(out, np.outer(want, want.conj()), atol=1e-7)  # RK4 truncation at h=0.01
    np.testing.assert_allclose(lindblad_rhs(rho, H, []), -1j * (H @ rho - rho @ H))


def test_small_step_kraus_map_approaches_lindbladian(lat22):
    H = qubit_hamiltonian(lat22, ModelParams()).toarray()
    rho = random_rho(4, 3)
    gamma = 2.0
    jumps = jump_operators(lat22, gamma)
    errs = []
    for dt in (1e-2, 5e-3):
        step = apply_cptp_step(rho, lat22, gamma * dt, hamiltonian=H, dt=dt)
        errs.append(np.abs(step - rho - dt * lindblad_rhs(rho, H, jumps)).max())
    assert errs[1] < 0.3 * errs[0]


def test_rho_currents_match_state_vector(lat22):
    params = ModelParams(phi=0.8)
    rng = np.random.default_rng(4)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    psi = StateVector(v / np.linalg.norm(v))
    rho = np.outer(psi.amplitudes, psi.amplitudes.conj())
    want = [bond_current(psi, lat22, b, params) for b in lat22.bonds]
    np.testing.assert_allclose(rho_currents(rho, lat22, params), want, atol=1e-13)


def test_drive_site_examples():
    rng = RngStream(0)
    ev, psi = drive_site(StateVector.from_bits([0, 0]), 0, 1, 1.0, rng)
    assert (ev.coin, ev.pre_bit) == (1, 0) and psi.probability_one(0) == 1.0
    ev, psi = drive_site(StateVector.from_bits([0, 1]), 1, 0, 1.0, rng)
    assert (ev.coin, ev.pre_bit) == (1, 1) and psi.probability_one(1) == 0.0
    rng = RngStream(1)
    psi = qsim.apply_gate(StateVector.zeros(1), "h", (0,))
    ev, out = drive_site(psi.copy(), 0, 1, 0.0, rng)
    assert ev.coin == 0 and ev.pre_bit == -1 and rng.draws == 1
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes)


def test_drive_coin_frequency():
    rng = RngStream(2)
    n, p = 20_000, 0.62
    fired = sum(drive_site(StateVector.from_bits([1]), 0, 1, p, rng)[0].coin for _ in range(n))
    assert abs(fired / n - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_random_product_init(lat22):
    lat = build_lattice(3, 3)
    params = ModelParams()
    counts = np.zeros(lat.n_sites)
    n = 5000
    for s in range(n):
        rng = RngStream(7, s)
        bits = initial_bits(params, lat, rng)
        assert bits[lat.source] == 1 and bits[lat.drain] == 0
        assert rng.draws == lat.n_sites - 2
        counts += bits
    free = [i for i in range(lat.n_sites) if i not in (lat.source, lat.drain)]
    assert P_HALF == pytest.approx(0.5)
    assert np.all(np.abs(counts[free] / n - 0.5) < 0.03)


def test_biased_and_bitstring_init(lat22):
    p = ModelParams(init="bitstring", init_bits=(1, 1, 0, 0))
    rng = RngStream(0)
    assert initial_bits(p, lat22, rng) == (1, 1, 0, 0) and rng.draws == 0
    p = ModelParams(init="biased", init_densities=(1.0, 0.0, 1.0, 0.0))
    assert initial_bits(p, lat22, RngStream(0)) == (1, 0, 1, 0)
    with pytest.raises(ConfigError):
        initial_bits(ModelParams(init="bitstring", init_bits=(1, 0)), lat22, RngStream(0))


def test_zero_drive_is_pure_trotter(lat22):
    params = ModelParams(V=0.5, phi=0.4, gamma=0.0, m=6, init="bitstring", init_bits=(1, 0, 0, 1))
    rec, psi = run_trajectory(params, lat22, RngStream(3), engine="dense")
    be = make_backend(lat22, params, engine="dense")
    ref = be.prepare(params.init_bits)
    for _ in range(params.m):
        ref = be.step(ref)
    np.testing.assert_allclose(psi.amplitudes, ref.amplitudes, atol=1e-13)
    assert np.all(rec.coins == 0)


def test_trajectories_average_to_kraus_map(lat22):
    params = ModelParams(dt=0.25, gamma=2.0, m=8, V=0.0)
    n = 3000
    ens = run_ensemble(params, lat22, n, seed=5, observe="every")
    be = make_backend(lat22, params, engine="dense")
    u = np.array([be.step(StateVector.basis(4, b)).amplitudes for b in range(16)]).T
    rho = np.zeros((16, 16), dtype=complex)
    for s in range(n):
        bits = initial_bits(params, lat22, RngStream(5, s))
        idx = sum(b << q for q, b in enumerate(bits))
        rho[idx, idx] += 1.0 / n
    for t in range(1, params.m + 1):
        rho = apply_cptp_step(rho, lat22, params.p, unitary=u)
        mean = ens.densities[:, t].mean(axis=0)
        err = ens.densities[:, t].std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(mean - rho_densities(rho, 4)) < 4 * err + 1e-12), t


def test_record_json_round_trip(lat22):
    params = ModelParams(m=5)
    rec, _ = run_trajectory(params, lat22, RngStream(9, 2), measurement="density")
    back = TrajectoryRecord.from_json(rec.to_json())
    assert back.init_bits == rec.init_bits and back.final_bits == rec.final_bits
    np.testing.assert_array_equal(back.coins, rec.coins)
    np.testing.assert_array_equal(back.pre_bits, rec.pre_bits)
    bad = rec.to_json().replace('"pre_bits": [[', '"pre_bits": [[7, 7], [')
    with pytest.raises(Exception):
        TrajectoryRecord.from_json(bad)


def test_record_validation_flags_inconsistent_bits():
    rec = TrajectoryRecord(0, 0, (1, 0), np.array([[1, 0]], dtype=np.int8), np.array([[-1, -1]], dtype=np.int8))
    with pytest.raises(NumericalIntegrityError):
        rec.validate()


def test_trajectory_determinism(lat22):
    params = ModelParams(V=1.0, m=7)
    a, sa = run_trajectory(params, lat22, RngStream(4, 1), measurement="density")
    b, sb = run_trajectory(params, lat22, RngStream(4, 1), measurement="density")
    assert a.to_json() == b.to_json()
    np.testing.assert_array_equal(sa.amplitudes, sb.amplitudes)


def test_source_is_occupied_after_firing(lat22):
    params = ModelParams(m=10)
    rec, _ = run_trajectory(params, lat22, RngStream(1), observe="every", engine="dense")
    for t in range(params.m):
        if rec.coins[t, 0]:
            assert rec.densities[t + 1, lat22.source] == pytest.approx(1.0)
        if rec.coins[t, 1]:
            assert rec.densities[t + 1, lat22.drain] == pytest.approx(0.0, abs=1e-15)


def test_unknown_backend_options(lat22):
    with pytest.raises(ConfigError):
        make_backend(lat22, ModelParams(), encoding="dk")
    with pytest.raises(ConfigError):
        make_backend(lat22, ModelParams(), engine="gpu")
    with pytest.raises(ConfigError):
        make_backend(lat22, ModelParams(), encoding="jw")
