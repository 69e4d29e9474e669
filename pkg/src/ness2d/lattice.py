"""Square-lattice geometry, bond sectors and Peierls phases.

Sites are indexed row-major, ``index = x + y * width``, with the source at the
bottom-left corner ``(0, 0)`` and the drain at the top-right corner.  Every bond
is stored once, oriented from the left site to the right site (horizontal) or
from the bottom site to the top site (vertical).  That orientation is also the
source-to-drain direction used for bond currents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SECTOR_ORDER = ("red", "green", "blue", "yellow")


@dataclass(frozen=True)
class Bond:
    """Nearest-neighbour bond ``j -> k`` with ``j`` left of / below ``k``."""

    j: int
    k: int
    orientation: str  # "h" or "v"
    x: int  # coordinates of site j
    y: int

    @property
    def sites(self) -> tuple[int, int]:
        return (self.j, self.k)


@dataclass(frozen=True)
class LatticeSpec:
    width: int
    height: int
    bonds: tuple[Bond, ...]
    sectors: dict = field(hash=False, compare=False)
    source: int = 0
    drain: int = -1

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    @property
    def sites(self) -> list[tuple[int, int]]:
        return [self.coords(i) for i in range(self.n_sites)]

    def site_index(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise IndexError(f"site ({x}, {y}) outside {self.width}x{self.height} lattice")
        return x + y * self.width

    def coords(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.n_sites:
            raise IndexError(f"site {i} outside lattice")
        return (i % self.width, i // self.width)

    def bond_index(self, j: int, k: int) -> int:
        """Index of the bond joining ``j`` and ``k`` (either order)."""
        a, b = min(j, k), max(j, k)
        for n, bond in enumerate(self.bonds):
            if bond.j == a and bond.k == b:
                return n
        raise KeyError(f"no bond between sites {j} and {k}")

    def sector_bonds(self, name: str) -> list[Bond]:
        return [self.bonds[n] for n in self.sectors[name]]

    def neighbours(self, i: int) -> list[int]:
        out = []
        for b in self.bonds:
            if b.j == i:
                out.append(b.k)
            elif b.k == i:
                out.append(b.j)
        return sorted(out)

    def is_driven_bond(self, bond: Bond) -> bool:
        """True when the bond touches the source or the drain."""
        return bool({bond.j, bond.k} & {self.source, self.drain})

    def to_json(self) -> str:
        payload = {
            "width": self.width,
            "height": self.height,
            "source": self.source,
            "drain": self.drain,
            "sites": [list(self.coords(i)) for i in range(self.n_sites)],
            "bonds": [[b.j, b.k, b.orientation] for b in self.bonds],
            "sectors": {name: list(self.sectors[name]) for name in SECTOR_ORDER},
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "LatticeSpec":
        data = json.loads(text)
        lat = build_lattice(data["width"], data["height"])
        if [[b.j, b.k, b.orientation] for b in lat.bonds] != data["bonds"]:
            raise ValueError("lattice JSON bonds do not match the canonical layout")
        return lat


def build_lattice(width: int, height: int) -> LatticeSpec:
    """Open-boundary ``width x height`` lattice with the four commuting sectors.

    Horizontal bonds whose left site has even ``x + y`` form the red sector, the
    remaining horizontal bonds the green sector.  Vertical bonds split the same
    way by the parity of their lower site into blue and yellow.  Within a sector
    no two bonds share a site.
    """
    if width < 2 or height < 2:
        raise ValueError(f"lattice must be at least 2x2, got {width}x{height}")
    bonds = []
    for y in range(height):
        for x in range(width - 1):
            j = x + y * width
            bonds.append(Bond(j, j + 1, "h", x, y))
    for y in range(height - 1):
        for x in range(width):
            j = x + y * width
            bonds.append(Bond(j, j + width, "v", x, y))
    sectors: dict[str, list[int]] = {name: [] for name in SECTOR_ORDER}
    for n, b in enumerate(bonds):
        even = (b.x + b.y) % 2 == 0
        if b.orientation == "h":
            sectors["red" if even else "green"].append(n)
        else:
            sectors["blue" if even else "yellow"].append(n)
    sectors_t = {name: tuple(v) for name, v in sectors.items()}
    return LatticeSpec(width, height, tuple(bonds), sectors_t, 0, width * height - 1)


def peierls_phase(bond: Bond, phi: float) -> float:
    """Phase ``theta`` multiplying ``c_j^dag c_k``: ``y * phi`` on horizontal bonds."""
    return bond.y * phi if bond.orientation == "h" else 0.0


def plaquettes(lat: LatticeSpec) -> list[tuple[int, int, int, int]]:
    """Faces as (bottom-left, bottom-right, top-right, top-left), anticlockwise."""
    out = []
    for y in range(lat.height - 1):
        for x in range(lat.width - 1):
            bl = lat.site_index(x, y)
            out.append((bl, bl + 1, bl + 1 + lat.width, bl + lat.width))
    return out


def plaquette_flux(lat: LatticeSpec, face: tuple[int, int, int, int], phi: float) -> float:
    """Phase picked up by a particle hopping anticlockwise around a face, in (-pi, pi].

    Hopping ``a -> b`` multiplies by the coefficient of ``c_b^dag c_a``, which
    is ``e^{-i theta}`` along the bond orientation and ``e^{+i theta}`` against it.
    """
    total = 0.0
    loop = list(face) + [face[0]]
    for a, b in zip(loop[:-1], loop[1:]):
        bond = lat.bonds[lat.bond_index(a, b)]
        theta = peierls_phase(bond, phi)
        total += -theta if (a, b) == bond.sites else theta
    return float(np.angle(np.exp(1j * total)))


def taxicab_distance(lat: LatticeSpec, site: int, reference: int | None = None) -> int:
    ref = lat.source if reference is None else reference
    x0, y0 = lat.coords(ref)
    x, y = lat.coords(site)
    return abs(x - x0) + abs(y - y0)


def diagonal_sites(lat: LatticeSpec) -> list[int]:
    return [i for i in range(lat.n_sites) if lat.coords(i)[0] == lat.coords(i)[1]]


def sites_below_diagonal(lat: LatticeSpec) -> list[int]:
    return [i for i in range(lat.n_sites) if lat.coords(i)[0] > lat.coords(i)[1]]


def sites_above_diagonal(lat: LatticeSpec) -> list[int]:
    return [i for i in range(lat.n_sites) if lat.coords(i)[1] > lat.coords(i)[0]]


def edge_bonds(lat: LatticeSpec) -> tuple[list[int], list[int]]:
    """Perimeter bond indices (below, above) the source-drain diagonal.

    Below: bottom row and right column.  Above: left column and top row.
    """
    below, above = [], []
    for n, b in enumerate(lat.bonds):
        if b.orientation == "h" and b.y == 0:
            below.append(n)
        elif b.orientation == "v" and b.x == lat.width - 1:
            below.append(n)
        elif b.orientation == "v" and b.x == 0:
            above.append(n)
        elif b.orientation == "h" and b.y == lat.height - 1:
            above.append(n)
    return below, above


def boundary_bonds(lat: LatticeSpec) -> list[int]:
    below, above = edge_bonds(lat)
    return sorted(below + above)


def diagonal_bonds(lat: LatticeSpec) -> list[int]:
    """Bonds with at least one end on the ``x == y`` diagonal."""
    diag = set(diagonal_sites(lat))
    return [n for n, b in enumerate(lat.bonds) if b.j in diag or b.k in diag]


def cut_bonds(lat: LatticeSpec, d: int) -> list[int]:
    """Bonds crossing the counter-diagonal cut between distance ``d`` and ``d + 1``."""
    return [
        n for n, b in enumerate(lat.bonds)
        if taxicab_distance(lat, b.j) == d and taxicab_distance(lat, b.k) == d + 1
    ]
