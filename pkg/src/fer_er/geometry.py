"""Block, disentangler and window geometry for one RG layer.

Sites carry integer coordinates on an n (1D) or n x n (2D) periodic grid;
site index is row-major.  Blocks are {2a, 2a+1} per axis; disentanglers act
on plaquettes {2a-1, 2a} per axis, i.e. across every block boundary (1D) or
around every corner shared by four blocks (2D).  Plaquette sites are listed
row-major; so are block sites.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class BlockGeometry:
    dimension: int
    sites: int
    modes_per_site: int
    twist: tuple = (1,)
    blocks: list = field(default_factory=list)
    disentanglers: list = field(default_factory=list)

    @property
    def block_sites(self) -> int:
        return 2**self.dimension

    @property
    def site_count(self) -> int:
        return self.sites**self.dimension

    def wrap(self, coord):
        """Physical site index and boundary sign of an unwrapped coordinate."""
        sign = 1
        idx = 0
        for c, t in zip(coord, self.twist):
            q, r = divmod(int(c), self.sites)
            if q % 2 and t == -1:
                sign = -sign
            idx = idx * self.sites + r
        return idx, sign

    def site_majoranas(self, coord):
        idx, sign = self.wrap(coord)
        m = 2 * self.modes_per_site
        return np.arange(idx * m, (idx + 1) * m), np.full(m, sign)

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "sites_per_axis": self.sites,
            "modes_per_site": self.modes_per_site,
            "twist": list(self.twist),
            "blocks": [[list(c) for c in b] for b in self.blocks],
            "disentanglers": [[list(c) for c in p] for p in self.disentanglers],
            "window_extent_blocks": 3,
        }

    def dump(self, path=None):
        d = self.to_dict()
        d["window"] = window_indices(self, 0).to_dict()
        text = json.dumps(d, indent=1)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _cell(corner, dim):
    offs = itertools.product((0, 1), repeat=dim)
    return [tuple(c + o for c, o in zip(corner, off)) for off in offs]


def build_geometry(dimension, sites, modes_per_site, twist=None) -> BlockGeometry:
    """Geometry of one layer on a periodic lattice of `sites` per axis."""
    if dimension not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if sites % 2:
        raise ValueError(f"odd side length {sites}")
    if sites < 4:
        raise ValueError("need at least two blocks per axis")
    twist = tuple(twist) if twist is not None else (1,) * dimension
    half = sites // 2
    blocks = []
    plaqs = []
    for c in itertools.product(range(half), repeat=dimension):
        blocks.append(_cell([2 * x for x in c], dimension))
        plaqs.append(_cell([2 * x - 1 for x in c], dimension))
    return BlockGeometry(dimension, sites, modes_per_site, twist, blocks, plaqs)


@dataclass
class Window:
    sites: list                   # unwrapped coordinates, in window order
    roles: list                   # "central", "partner" or "padding"
    indices: np.ndarray           # Majorana indices into the level's matrix
    signs: np.ndarray             # boundary signs per Majorana index
    central: np.ndarray           # window positions of the central block, block order
    slots: list                   # window positions per disentangler, plaquette order
    majoranas_per_site: int

    @property
    def active(self) -> np.ndarray:
        """Positions of central and partner sites (the ones disentanglers touch)."""
        m = self.majoranas_per_site
        k = sum(1 for r in self.roles if r != "padding")
        return np.arange(k * m)

    def extract(self, gamma):
        g = gamma[np.ix_(self.indices, self.indices)]
        return g * np.outer(self.signs, self.signs)

    def to_dict(self):
        return {
            "sites": [list(map(int, s)) for s in self.sites],
            "roles": self.roles,
            "majorana_indices": [int(i) for i in self.indices],
            "signs": [int(s) for s in self.signs],
            "slots": [[int(i) for i in s] for s in self.slots],
        }


def window_indices(geom: BlockGeometry, target: int) -> Window:
    """Optimization window around block `target`.

    Order: central block sites, then disentangler partners, then padding
    (the rest of the 3-block / 3x3-block window), each group row-major.
    Sites that coincide on small lattices are listed once.
    """
    if not 0 <= target < len(geom.blocks):
        raise IndexError(f"block {target} out of range")
    D = geom.dimension
    corner = geom.blocks[target][0]
    central = list(geom.blocks[target])
    plaq_corners = [tuple(c + 2 * o - 1 for c, o in zip(corner, off)) for off in itertools.product((0, 1), repeat=D)]
    slots_sites = [_cell(pc, D) for pc in plaq_corners]
    touched = sorted({s for p in slots_sites for s in p} - set(central))
    ranges = [range(c - 2, c + 4) for c in corner]
    padding = sorted(set(itertools.product(*ranges)) - set(central) - set(touched))
    order = []
    roles = []
    seen = set()
    for group, role in ((central, "central"), (touched, "partner"), (padding, "padding")):
        for s in group:
            phys = geom.wrap(s)[0]
            if phys in seen:
                if role != "padding":
                    raise ValueError("lattice too small: disentangler sites overlap")
                continue
            seen.add(phys)
            order.append(tuple(s))
            roles.append(role)
    m = 2 * geom.modes_per_site
    pos = {s: i for i, s in enumerate(order)}
    idx = []
    sgn = []
    for s in order:
        a, b = geom.site_majoranas(s)
        idx.append(a)
        sgn.append(b)
    slots = [np.concatenate([np.arange(pos[s] * m, (pos[s] + 1) * m) for s in p]) for p in slots_sites]
    central_pos = np.arange(len(central) * m)
    return Window(order, roles, np.concatenate(idx), np.concatenate(sgn), central_pos, slots, m)


def rotate_quarter(coord, sites):
    """90 degree rotation about the plaquette centre (-1/2, -1/2), wrapped."""
    x, y = coord
    return (y % sites, (-1 - x) % sites)


def check_partition(geom: BlockGeometry):
    """Blocks partition the lattice; plaquettes are disjoint and straddle >= 2 blocks."""
    n = geom.sites
    block_of = {}
    for b, sites in enumerate(geom.blocks):
        for s in sites:
            key = tuple(x % n for x in s)
            if key in block_of:
                return False
            block_of[key] = b
    if len(block_of) != geom.site_count:
        return False
    used = set()
    for p in geom.disentanglers:
        keys = [tuple(x % n for x in s) for s in p]
        if used & set(keys) or len(set(keys)) != len(keys):
            return False
        used |= set(keys)
        if len({block_of[k] for k in keys}) < 2:
            return False
    return True
