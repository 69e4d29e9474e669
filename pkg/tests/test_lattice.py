import math

import numpy as np
import pytest

from ness2d.lattice import (
    SECTOR_ORDER, LatticeSpec, boundary_bonds, build_lattice, cut_bonds, diagonal_bonds, edge_bonds,
    peierls_phase, plaquette_flux, plaquettes, sites_above_diagonal, sites_below_diagonal, taxicab_distance,
)


@pytest.mark.parametrize("w,h", [(2, 2), (2, 3), (3, 2), (4, 4), (5, 3), (7, 7)])
def test_counts_and_corners(w, h):
    lat = build_lattice(w, h)
    assert lat.n_sites == w * h
    assert len(lat.bonds) == w * (h - 1) + h * (w - 1)
    assert lat.coords(lat.source) == (0, 0)
    assert lat.coords(lat.drain) == (w - 1, h - 1)


def test_4x4_numbering():
    lat = build_lattice(4, 4)
    assert (lat.n_sites, len(lat.bonds), lat.source, lat.drain) == (16, 24, 0, 15)
    assert lat.site_index(1, 2) == 9


@pytest.mark.parametrize("w,h", [(1, 4), (4, 1), (0, 3)])
def test_rejects_thin_lattices(w, h):
    with pytest.raises(ValueError):
        build_lattice(w, h)


@pytest.mark.parametrize("w,h", [(2, 2), (3, 3), (4, 4), (4, 3), (6, 5)])
def test_sectors_partition_into_matchings(w, h):
    lat = build_lattice(w, h)
    seen = []
    for name in SECTOR_ORDER:
        ends = [s for b in lat.sector_bonds(name) for s in b.sites]
        assert len(ends) == len(set(ends)), name
        seen += list(lat.sectors[name])
    assert sorted(seen) == list(range(len(lat.bonds)))


def test_4x4_sector_sizes():
    lat = build_lattice(4, 4)
    sizes = {name: len(lat.sectors[name]) for name in SECTOR_ORDER}
    assert sizes == {"red": 6, "green": 6, "blue": 6, "yellow": 6}
    red = {b.sites for b in lat.sector_bonds("red")}
    assert (0, 1) in red and (5, 6) in red and (4, 5) not in red


def test_bond_orientation():
    lat = build_lattice(3, 3)
    for b in lat.bonds:
        assert b.j < b.k
        assert b.k - b.j == (1 if b.orientation == "h" else lat.width)
        assert lat.coords(b.j) == (b.x, b.y)


def test_peierls_examples():
    lat = build_lattice(4, 4)
    h0 = lat.bonds[lat.bond_index(0, 1)]
    h2 = lat.bonds[lat.bond_index(8, 9)]
    v = lat.bonds[lat.bond_index(5, 9)]
    assert peierls_phase(h0, 1.234) == 0.0
    assert peierls_phase(h2, math.pi / 2) == pytest.approx(math.pi)
    assert peierls_phase(v, math.pi / 2) == 0.0


@pytest.mark.parametrize("phi", [0.0, 0.3, math.pi / 4, math.pi / 2, 2.0])
def test_flux_per_plaquette(phi):
    lat = build_lattice(4, 3)
    faces = plaquettes(lat)
    assert len(faces) == (lat.width - 1) * (lat.height - 1)
    for f in faces:
        assert plaquette_flux(lat, f, phi) == pytest.approx(float(np.angle(np.exp(1j * phi))), abs=1e-12)


def test_taxicab():
    lat = build_lattice(4, 4)
    assert taxicab_distance(lat, 0, 0) == 0
    assert taxicab_distance(lat, lat.drain) == 6
    assert taxicab_distance(lat, lat.site_index(1, 2)) == 3


def test_diagonal_partition_is_mirror_symmetric():
    lat = build_lattice(4, 4)
    below, above = sites_below_diagonal(lat), sites_above_diagonal(lat)
    assert len(below) == len(above) == 6
    mirror = {lat.site_index(x, y): lat.site_index(y, x) for x in range(4) for y in range(4)}
    assert sorted(mirror[s] for s in below) == sorted(above)
    eb, ea = edge_bonds(lat)
    assert len(eb) == len(ea) == 6
    assert sorted(boundary_bonds(lat)) == sorted(eb + ea)


def test_diagonal_bonds_touch_diagonal():
    lat = build_lattice(4, 4)
    diag = diagonal_bonds(lat)
    assert len(diag) == 12
    for n in diag:
        b = lat.bonds[n]
        assert any(lat.coords(s)[0] == lat.coords(s)[1] for s in b.sites)


def test_cuts_cover_all_bonds_once():
    lat = build_lattice(4, 4)
    all_cut = [n for d in range(6) for n in cut_bonds(lat, d)]
    assert sorted(all_cut) == list(range(24))
    assert [len(cut_bonds(lat, d)) for d in range(6)] == [2, 4, 6, 6, 4, 2]


def test_json_round_trip():
    lat = build_lattice(3, 4)
    back = LatticeSpec.from_json(lat.to_json())
    assert back == lat and back.sectors == lat.sectors


def test_neighbours_and_bond_index():
    lat = build_lattice(3, 3)
    assert lat.neighbours(4) == [1, 3, 5, 7]
    assert lat.bond_index(4, 1) == lat.bond_index(1, 4)
    with pytest.raises(KeyError):
        lat.bond_index(0, 4)
    with pytest.raises(IndexError):
        lat.coords(9)
