"""
Periodic distances and neighbor lists
=====================================
"""

import numpy as np

from catloop import (
    AtomSite,
    Lattice,
    Structure,
    build_neighbor_list,
    min_image_distance,
    min_pair_distance,
    volume_per_atom,
)

# rock-salt-ish toy cell (compressed so covalent bonds register)
lat = Lattice(a=3.3, b=3.3, c=3.3, alpha=90, beta=90, gamma=90)
s = Structure(
    lattice=lat,
    sites=(
        AtomSite("Na1", "Na", (0.0, 0.0, 0.0)),
        AtomSite("Cl1", "Cl", (0.5, 0.5, 0.5)),
    ),
    space_group_symbol="P 1",
)

print("cell volume:", lat.volume)
print("volume per atom:", volume_per_atom(s))
print("Na-Cl minimum-image distance:", min_image_distance(s, 0, 1))
print("Na self-image distance:", min_image_distance(s, 0, 0))
print("shortest distance overall:", min_pair_distance(s))

# a strongly sheared cell: the b vector is almost parallel to a, so the
# nearest periodic image of a site is not in an adjacent cell of the naive
# (-1, 0, 1) scan you might write first
m = np.array([[5.0, 0.0, 0.0], [4.9, 0.8, 0.0], [0.0, 0.0, 9.0]])
sheared = Structure(
    lattice=Lattice.from_matrix(m),
    sites=(
        AtomSite("Cu1", "Cu", (0.0, 0.0, 0.0)),
        AtomSite("Cu2", "Cu", (0.5, 0.5, 0.0)),
    ),
    space_group_symbol="P 1",
)
print("\nsheared cell lengths/angles:",
      np.round(sheared.lattice.lengths, 3), np.round(sheared.lattice.angles, 2))
print("Cu-Cu minimum-image distance:", round(min_image_distance(sheared, 0, 1), 6))

# neighbor list: bonded iff distance <= scale * (r_i + r_j)
nl = build_neighbor_list(s, scale=1.2)
print(f"\nneighbor entries at scale 1.2: {len(nl)}")
for e in nl.entries[:6]:
    print(f"  {e.i} -> {e.j} image={e.image} d={e.distance:.3f}")

print("\nneighbors of site 0:")
for e in nl.neighbors_of(0):
    print(f"  j={e.j} image={e.image} d={e.distance:.3f}")
