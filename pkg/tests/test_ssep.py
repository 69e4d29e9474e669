"""Classical driven exclusion process."""

import math

import numpy as np
import pytest

from ness2d import ssep as S
from ness2d.lattice import build_lattice
from ness2d.qsim import RngStream


def test_selection_probabilities_sum_to_one():
    cfg = S.SsepConfig(gamma=2.0)
    pb, ps, pd = cfg.selection_probabilities()
    assert pb + ps + pd == pytest.approx(1.0)
    assert ps == pd == pytest.approx(2.0 / (24 + 4.0))


def test_energy_counts_occupied_bonds():
    lat = build_lattice(2, 2)
    bonds, _ = S._geometry(lat)
    assert S.energy(np.array([1, 1, 1, 1]), bonds, 1.5) == -6.0
    assert S.energy(np.array([1, 0, 0, 1]), bonds, 1.5) == 0.0


def test_swap_energy_change_matches_energy_difference():
    lat = build_lattice(3, 3)
    bonds, nbr = S._geometry(lat)
    rng = np.random.default_rng(0)
    for _ in range(200):
        occ = rng.integers(0, 2, 9).astype(np.int64)
        b = int(rng.integers(len(bonds)))
        dE, i, j = S._swap_energy_change(occ, nbr, bonds, b, 0.8)
        if i < 0:
            assert occ[bonds[b, 0]] == occ[bonds[b, 1]]
            continue
        new = occ.copy()
        new[i], new[j] = 0, 1
        assert dE == pytest.approx(S.energy(new, bonds, 0.8) - S.energy(occ, bonds, 0.8))


def test_zero_interaction_accepts_every_swap():
    cfg = S.SsepConfig(lattice=build_lattice(2, 2), V=0.0, gamma=0.0)
    rng = RngStream(1)
    state = S.SsepState(np.array([1, 0, 0, 0]))
    bonds, _ = S._geometry(cfg.lattice)
    for _ in range(200):
        draws = rng.draws
        S.ssep_step(state, cfg, rng)
        assert rng.draws == draws + 1  # no acceptance draw is ever needed
        assert state.n_particles == 1
    assert state.micro_steps == 200 and state.time_units == 50


def test_number_conserved_without_drive():
    cfg = S.SsepConfig(lattice=build_lattice(2, 2), V=1.0, gamma=0.0)
    rng = RngStream(2)
    state = S.SsepState(np.array([1, 1, 0, 0]))
    for _ in range(5000):
        S.ssep_step(state, cfg, rng)
        assert state.n_particles == 2


def test_source_filled_and_drain_emptied_when_selected():
    cfg = S.SsepConfig(lattice=build_lattice(2, 2), V=1.0, gamma=1e6)
    rng = RngStream(3)
    state = S.SsepState(np.array([0, 1, 1, 1]))
    for _ in range(200):
        S.ssep_step(state, cfg, rng)
    assert state.occupation[0] == 1 and state.occupation[3] == 0


def test_invalid_config_and_state():
    with pytest.raises(ValueError):
        S.SsepConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        S.SsepConfig(fill=1.5)
    with pytest.raises(ValueError):
        S.SsepState(np.array([0, 2]))


def test_equilibrium_half_filling_is_uniform():
    cfg = S.SsepConfig(lattice=build_lattice(3, 3), V=0.0, gamma=0.0, steps=50, trajectories=20_000, seed=4)
    f = S.ssep_ness(cfg)
    assert np.all(np.abs(f.mean - 0.5) < 4 * f.stderr)


def test_results_do_not_depend_on_chunking():
    cfg = S.SsepConfig(lattice=build_lattice(3, 3), steps=20, trajectories=3000, seed=9)
    a = S.ssep_ness(cfg, chunk=3000)
    b = S.ssep_ness(cfg, chunk=700)
    np.testing.assert_array_equal(a.mean, b.mean)


def test_driven_ness_orders_block_above_edges():
    cfg = S.SsepConfig(steps=100, trajectories=20_000, seed=5)
    f = S.ssep_ness(cfg, record=True)
    block, edge = S.block_and_edge_means(f)
    assert block - edge > 0.05
    assert f.series.shape == (101, 16)
    assert f.grid()[0, 0] > 0.9 and f.grid()[3, 3] < 0.1


def test_boltzmann_check_small():
    res = S.boltzmann_check(n_samples=50_000, seed=1)
    assert res.dof == 5 and res.observed.sum() == 50_000
    assert res.p_value > 0.01


def test_density_field_csv(tmp_path):
    f = S.DensityField(2, 2, np.array([0.1, 0.2, 0.3, 0.4]), np.zeros(4), 10)
    f.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "x,y,density,stderr" and lines[4].startswith("1,1,0.4")


def test_trajectory_seeds_prefix_stable():
    np.testing.assert_array_equal(S.trajectory_seeds(3, 5, 10), S.trajectory_seeds(3, 20)[10:15])
    assert math.isfinite(float(S.trajectory_seeds(0, 1)[0]))
