"""Periodic-boundary geometry: minimum-image distances and neighbor lists.

All routines treat the cell as fully periodic and work for arbitrary (also
strongly skewed) cells.  Distances are in angstroms.  Cells whose volume is
below `DEGENERATE_VOLUME` cannot support meaningful distances and raise
`DegenerateCellError`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .cif import Structure
from .elements import COVALENT_RADII

DEGENERATE_VOLUME = 1e-6  # cubic angstroms
DEFAULT_NEIGHBOR_SCALE = 1.2


class DegenerateCellError(ValueError):
    """Raised when a cell is too close to zero volume for distance work."""


def _check_cell(structure: Structure) -> np.ndarray:
    matrix = structure.lattice.matrix
    if abs(float(np.linalg.det(matrix))) < DEGENERATE_VOLUME:
        raise DegenerateCellError(
            f"cell volume below {DEGENERATE_VOLUME} cubic angstroms"
        )
    return matrix


def _slab_spacings(matrix: np.ndarray) -> np.ndarray:
    """Perpendicular spacing between lattice planes along each cell axis.

    A displacement with fractional component f_k along axis k has cartesian
    length >= |f_k| * spacing_k, which is what bounds the image search.
    """
    inv = np.linalg.inv(matrix)
    return 1.0 / np.linalg.norm(inv, axis=0)


def _shell_offsets(m: int) -> np.ndarray:
    """Integer offsets with max-norm exactly m (for m >= 1)."""
    rng = range(-m, m + 1)
    offs = [
        (i, j, k)
        for i, j, k in itertools.product(rng, rng, rng)
        if max(abs(i), abs(j), abs(k)) == m
    ]
    return np.array(offs, dtype=float)


_CORE_OFFSETS = np.array(
    list(itertools.product((-2, -1, 0, 1, 2), repeat=3)), dtype=float
)


def min_image_distance(structure: Structure, i: int, j: int) -> float:
    """Shortest distance between site i and any periodic image of site j.

    For i == j this is the shortest nonzero lattice translation from the
    site to its own images.  The search scans the {-2..2}^3 offset block and
    keeps expanding shells until no closer image is geometrically possible.
    """
    matrix = _check_cell(structure)
    n = len(structure.sites)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"site index out of range for {n} sites")
    frac = structure.frac_coords()
    delta = frac[j] - frac[i]
    delta -= np.round(delta)

    offsets = _CORE_OFFSETS
    if i == j:
        offsets = offsets[np.any(offsets != 0.0, axis=1)]
    vecs = (delta + offsets) @ matrix
    best = float(np.min(np.linalg.norm(vecs, axis=1)))

    spacings = _slab_spacings(matrix)
    d_min = float(np.min(spacings))
    m = 3
    while (m - 0.5) * d_min <= best:
        shell = _shell_offsets(m)
        vecs = (delta + shell) @ matrix
        best = min(best, float(np.min(np.linalg.norm(vecs, axis=1))))
        m += 1
    return best


def min_pair_distance(structure: Structure) -> float:
    """Smallest periodic distance over all site pairs, including self-images."""
    n = len(structure.sites)
    return min(
        min_image_distance(structure, i, j)
        for i in range(n)
        for j in range(i, n)
    )


def volume_per_atom(structure: Structure) -> float:
    """Cell volume divided by the number of sites, in cubic angstroms."""
    return structure.lattice.volume / len(structure.sites)


def _lex_positive(offset: tuple[int, int, int]) -> bool:
    for v in offset:
        if v != 0:
            return v > 0
    return False


def iter_periodic_pairs(
    structure: Structure, cutoff: float | np.ndarray
) -> list[tuple[int, int, tuple[int, int, int], float]]:
    """All periodic pairs (i, j, image, distance) within a cutoff.

    `cutoff` is either a scalar or an (N, N) per-pair matrix.  Each physical
    pair appears once: i < j with any image, or i == j with a
    lexicographically positive image.  The zero-offset self pair is never
    included.
    """
    matrix = _check_cell(structure)
    n = len(structure.sites)
    cut = np.asarray(cutoff, dtype=float)
    if cut.ndim == 0:
        cut = np.full((n, n), float(cut))
    elif cut.shape != (n, n):
        raise ValueError(f"cutoff matrix must be ({n}, {n})")
    cut_max = float(np.max(cut))
    if cut_max <= 0.0:
        return []

    spacings = _slab_spacings(matrix)
    reach = np.ceil(cut_max / spacings + 0.5).astype(int)
    grids = [np.arange(-r, r + 1) for r in reach]
    offsets = np.array(
        list(itertools.product(*grids)), dtype=float
    )  # (G, 3)

    frac = structure.frac_coords()
    pairs: list[tuple[int, int, tuple[int, int, int], float]] = []
    for i in range(n):
        for j in range(i, n):
            pair_cut = cut[i, j]
            if pair_cut <= 0.0:
                continue
            delta = frac[j] - frac[i]
            vecs = (delta + offsets) @ matrix
            dists = np.linalg.norm(vecs, axis=1)
            for k in np.flatnonzero(dists <= pair_cut):
                image = tuple(int(v) for v in offsets[k])
                if i == j and not _lex_positive(image):
                    continue
                pairs.append((i, j, image, float(dists[k])))
    return pairs


@dataclass(frozen=True)
class NeighborEntry:
    """One directed neighbor record: site i sees site j in a given image."""

    i: int
    j: int
    image: tuple[int, int, int]
    distance: float

    def to_json_dict(self) -> dict:
        return {
            "site_i": self.i,
            "site_j": self.j,
            "image": list(self.image),
            "distance": self.distance,
        }


@dataclass(frozen=True)
class NeighborList:
    """Directed periodic neighbor entries, sorted by (i, j, image)."""

    entries: tuple[NeighborEntry, ...]
    n_sites: int

    def neighbors_of(self, i: int) -> tuple[NeighborEntry, ...]:
        return tuple(e for e in self.entries if e.i == i)

    def __len__(self) -> int:
        return len(self.entries)

    def to_json_list(self) -> list[dict]:
        return [e.to_json_dict() for e in self.entries]


def build_neighbor_list(
    structure: Structure,
    radii: Mapping[str, float] = COVALENT_RADII,
    scale: float = DEFAULT_NEIGHBOR_SCALE,
) -> NeighborList:
    """Neighbors within scale * (r_i + r_j) of each site, across images.

    The result is symmetric by construction: for every entry (i, j, image)
    the mirrored entry (j, i, -image) is present too.
    """
    if scale <= 0.0:
        return NeighborList((), len(structure.sites))
    elems = [s.element for s in structure.sites]
    r = np.array([radii[e] for e in elems], dtype=float)
    cut = scale * (r[:, None] + r[None, :])
    entries: list[NeighborEntry] = []
    for i, j, image, dist in iter_periodic_pairs(structure, cut):
        neg = (-image[0], -image[1], -image[2])
        entries.append(NeighborEntry(i, j, image, dist))
        entries.append(NeighborEntry(j, i, neg, dist))
    entries.sort(key=lambda e: (e.i, e.j, e.image))
    return NeighborList(tuple(entries), len(structure.sites))
