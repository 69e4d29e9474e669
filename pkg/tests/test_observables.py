"""Snapshots, bond currents, imbalances, profiles and stationarity."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from ness2d import gaussian as G
from ness2d import observables as O
from ness2d.channel import make_backend, rolling_mean
from ness2d.lattice import build_lattice
from ness2d.model import ModelParams, qubit_hamiltonian
from ness2d.qsim import RngStream, StateVector


def mirror_site(lat, i):
    x, y = lat.coords(i)
    return lat.site_index(y, x)


def mirrored(snap):
    lat = snap.lattice
    perm_s = [mirror_site(lat, i) for i in range(lat.n_sites)]
    dens = np.empty_like(snap.density_samples)
    dens[:, perm_s] = snap.density_samples
    cur = np.empty_like(snap.current_samples)
    for n, b in enumerate(lat.bonds):
        cur[:, lat.bond_index(perm_s[b.j], perm_s[b.k])] = snap.current_samples[:, n]
    return O.Snapshot(lat, dens, cur)


@pytest.fixture
def random_snapshot():
    lat = build_lattice(4, 4)
    rng = np.random.default_rng(0)
    return O.Snapshot(lat, rng.uniform(size=(50, 16)), rng.normal(size=(50, 24)))


def test_product_state_has_no_current():
    lat = build_lattice(3, 3)
    psi = StateVector.from_bits([1, 0, 1, 1, 0, 0, 1, 0, 1])
    for enc in ("hcb", "jw"):
        params = ModelParams(phi=0.7, statistics="fermion" if enc == "jw" else "hcb")
        assert all(O.bond_current(psi, lat, b, params, enc) == 0.0 for b in lat.bonds)


def test_current_obeys_continuity():
    lat = build_lattice(2, 2)
    params = ModelParams(phi=0.9)
    H = qubit_hamiltonian(lat, params).toarray()
    psi = np.zeros(16, dtype=complex)
    psi[1] = 1.0  # one particle on the source site
    psi = expm(-0.4j * H) @ psi
    h = 1e-5
    ahead = StateVector(expm(-1j * h * H) @ psi)
    behind = StateVector(expm(1j * h * H) @ psi)
    dn = (ahead.densities() - behind.densities()) / (2 * h)
    state = StateVector(psi)
    net = np.zeros(4)
    for b in lat.bonds:
        c = O.bond_current(state, lat, b, params)
        net[b.j] -= c
        net[b.k] += c
    np.testing.assert_allclose(dn, net, atol=1e-6)


def test_gaussian_and_state_vector_currents_agree():
    lat = build_lattice(2, 3)
    params = ModelParams(phi=0.5, statistics="fermion", dt=0.3)
    be = make_backend(lat, params, engine="dense")
    bits = [1, 1, 0, 0, 1, 0]
    psi = be.prepare(bits)
    C = np.diag(np.array(bits, dtype=complex))
    W = G.trotter_propagator(lat, params)
    for _ in range(3):
        psi, C = be.step(psi), G.evolve_free(C, W)
    for b in lat.bonds:
        assert O.bond_current(C, lat, b, params, "gaussian") == pytest.approx(
            O.bond_current(psi, lat, b, params, "jw"), abs=1e-10)


def test_strict_flag_rejects_driven_bonds():
    lat = build_lattice(2, 2)
    with pytest.raises(ValueError):
        O.bond_current(StateVector.zeros(4), lat, lat.bonds[0], ModelParams(), strict=True)


def test_current_shots_match_operator_value():
    lat = build_lattice(2, 2)
    params = ModelParams()
    bond = lat.bonds[lat.bond_index(0, 1)]
    amps = np.zeros(16, dtype=complex)
    amps[0b0001] = 1 / math.sqrt(2)  # particle on site 0
    amps[0b0010] = 1j / math.sqrt(2)  # particle on site 1
    psi = StateVector(amps)
    want = O.bond_current(psi, lat, bond, params)
    assert abs(want) == pytest.approx(1.0)
    rng = RngStream(0)
    shots = np.array([O.measure_current_sector(psi, lat, "red", params, rng)[1][0] for _ in range(20_000)])
    assert abs(shots.mean() - want) < 3 * shots.std(ddof=1) / math.sqrt(len(shots)) + 1e-12


def test_current_gadget_is_unitary_and_empty_gives_zero():
    lat = build_lattice(2, 2)
    params = ModelParams(phi=0.6)
    seq = O.current_measurement_basis(lat, "blue", params)
    np.testing.assert_allclose(seq.inverse().to_matrix() @ seq.to_matrix(), np.eye(16), atol=1e-12)
    _, est = O.measure_current_sector(StateVector.zeros(4), lat, "blue", params, RngStream(1))
    assert np.all(est[~np.isnan(est)] == 0)


def test_dk_shot_estimator_matches_operator():
    lat = build_lattice(4, 4)
    params = ModelParams(statistics="fermion", phi=math.pi / 2, dt=0.29)
    be = make_backend(lat, params, encoding="dk")
    psi = be.step(be.prepare([1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0]))
    bond = lat.bonds[lat.bond_index(5, 6)]
    want = O.bond_current(psi, lat, bond, params, "dk")
    g, sign = O.current_measurement_gadget(lat, bond, params, "dk")
    rot = g.apply(psi.copy())
    nj, nk = rot.probability_one(bond.j), rot.probability_one(bond.k)
    assert sign * params.J * (nj - nk) == pytest.approx(want, abs=1e-12)


def test_mirror_symmetric_snapshot_has_no_imbalance(random_snapshot):
    s = random_snapshot
    sym = O.Snapshot(s.lattice, 0.5 * (s.density_samples + mirrored(s).density_samples),
                     0.5 * (s.current_samples + mirrored(s).current_samples))
    imb = O.imbalances(sym)
    assert imb.dN == pytest.approx(0.0, abs=1e-12) and imb.dJ == pytest.approx(0.0, abs=1e-12)


def test_imbalance_antisymmetry(random_snapshot):
    a = O.imbalances(random_snapshot)
    b = O.imbalances(mirrored(random_snapshot))
    assert b.dN == pytest.approx(-a.dN, abs=1e-12) and b.dJ == pytest.approx(-a.dJ, abs=1e-12)


def test_imbalance_needs_square_lattice():
    lat = build_lattice(3, 2)
    with pytest.raises(ValueError):
        O.imbalances(O.Snapshot(lat, np.zeros((2, 6)), np.zeros((2, 7))))


def test_profile_of_uniform_field_is_flat():
    lat = build_lattice(4, 4)
    snap = O.Snapshot(lat, np.full((10, 16), 0.3), np.zeros((10, 24)))
    d, mean, err = O.density_profile(snap)
    assert list(d) == list(range(7))
    np.testing.assert_allclose(mean, 0.3)
    np.testing.assert_allclose(err, 0.0, atol=1e-15)


def test_cut_bonds_partition_the_lattice():
    lat = build_lattice(4, 4)
    cuts = [O.cut_bonds(lat, d) for d in range(6)]
    assert sorted(n for c in cuts for n in c) == list(range(24))
    assert O.interior_cuts(lat) == [1, 2, 3, 4]


def test_fractions_and_bond_classes():
    lat = build_lattice(4, 4)
    cur = np.zeros((1, 24))
    cur[0, O.boundary_bonds(lat)] = 1.0
    snap = O.Snapshot(lat, np.zeros((1, 16)), cur)
    assert O.boundary_fraction(snap) == 1.0
    assert len(O.boundary_bonds(lat)) == 12 and len(O.diagonal_bonds(lat)) == 12


def test_snapshot_exports(tmp_path, random_snapshot):
    random_snapshot.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "kind,index,mean,stderr" and len(lines) == 1 + 16 + 24
    random_snapshot.to_json(tmp_path / "s.json")
    import json

    d = json.loads((tmp_path / "s.json").read_text())
    assert d["n_trajectories"] == 50 and len(d["currents"]) == 24


def test_rolling_mean_of_constant():
    np.testing.assert_allclose(rolling_mean(np.full(9, 2.5), 3), 2.5)


def test_stationarity_report():
    t = np.arange(40)
    series = {"flat": np.ones(40), "relax": 1 - np.exp(-t / 3.0), "ramp": 0.1 * t}
    rep = {e.name: e for e in O.stationarity_report(series)}
    assert rep["flat"].settled_at == 1
    assert rep["relax"].settled and rep["relax"].settled_at > 5
    assert not rep["ramp"].settled
    with pytest.raises(ValueError):
        O.stationarity_report({"short": np.ones(3)})


def test_stderr_single_sample_is_zero():
    np.testing.assert_array_equal(O.stderr(np.ones((1, 3))), np.zeros(3))
