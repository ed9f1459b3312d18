"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from catloop.cif import AtomSite, Lattice, RoleTag, Structure
from catloop.elements import SYMBOLS
from catloop.textify import SystemMetadata

# one line per acceptance criterion, echoed at the end of the pytest run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_structure(
    species,
    coords,
    lengths=(4.0, 4.0, 4.0),
    angles=(90.0, 90.0, 90.0),
    space_group="P 1",
    space_group_number=None,
    roles=None,
):
    """Compact structure builder used across the tests."""
    lattice = Lattice(*lengths, *angles)
    counts: dict[str, int] = {}
    sites = []
    for k, (el, xyz) in enumerate(zip(species, coords)):
        counts[el] = counts.get(el, 0) + 1
        role = roles[k] if roles is not None else RoleTag.UNSPECIFIED
        sites.append(
            AtomSite(
                label=f"{el}{counts[el]}",
                element=el,
                frac=tuple(xyz),
                role_tag=role,
            )
        )
    return Structure(
        lattice=lattice,
        sites=tuple(sites),
        space_group_symbol=space_group,
        space_group_number=space_group_number,
    )


def random_lattice_params(rng: np.random.Generator):
    """Random cell parameters with a non-degenerate volume factor."""
    while True:
        lengths = rng.uniform(2.5, 12.0, size=3)
        angles = rng.uniform(50.0, 130.0, size=3)
        ca, cb, cg = np.cos(np.radians(angles))
        vfac = 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg
        if vfac > 0.1:  # keep the cell usable for distance work
            return tuple(lengths), tuple(angles)


def random_structure(rng: np.random.Generator, max_sites: int = 8) -> Structure:
    """Random structure over the full element table, any cell shape."""
    n = int(rng.integers(1, max_sites + 1))
    species = [SYMBOLS[int(z)] for z in rng.integers(0, len(SYMBOLS), size=n)]
    coords = rng.random((n, 3))
    lengths, angles = random_lattice_params(rng)
    sg_mode = int(rng.integers(3))
    return make_structure(
        species,
        coords,
        lengths=lengths,
        angles=angles,
        space_group=None if sg_mode == 0 else "P 1",
        space_group_number=1 if sg_mode == 2 else None,
    )


@pytest.fixture
def cu_slab():
    """A small Cu(100)-style slab with one H adsorbate.

    Layout (orthorhombic 5.1 x 5.1 x 12.0 A):
      sites 0-3: top-layer Cu, a 2x2 square grid at z = 6.0 A
      sites 4-7: subsurface Cu directly below at z = 4.2 A
      site 8:    H at 1.4 A above site 0

    With the default 1.2 covalent-radius scale, H bonds only to site 0
    (1.4 < 1.956) and the in-plane Cu-Cu spacing of 2.55 A bonds each top
    atom to its two axis neighbors (2.55 < 3.168) but not diagonals (3.61).
    """
    a = 5.1
    c = 12.0
    z_top = 6.0 / c
    z_sub = 4.2 / c
    z_h = 7.4 / c
    species = ["Cu"] * 8 + ["H"]
    coords = [
        (0.0, 0.0, z_top),
        (0.5, 0.0, z_top),
        (0.0, 0.5, z_top),
        (0.5, 0.5, z_top),
        (0.0, 0.0, z_sub),
        (0.5, 0.0, z_sub),
        (0.0, 0.5, z_sub),
        (0.5, 0.5, z_sub),
        (0.0, 0.0, z_h),
    ]
    roles = [RoleTag.SURFACE_TOP] * 4 + [RoleTag.SUBSURFACE] * 4 + [
        RoleTag.ADSORBATE
    ]
    structure = make_structure(
        species, coords, lengths=(a, a, c), roles=roles
    )
    meta = SystemMetadata(
        adsorbate_indices=frozenset({8}),
        surface_top_indices=frozenset({0, 1, 2, 3}),
        catalyst_composition={"Cu": 8},
        miller_index=(1, 0, 0),
    )
    expected = {
        "primary": [0],
        "secondary": [1, 2],
        "configuration_part": "primary: Cu@Cu1; secondary: Cu@Cu2, Cu@Cu3",
    }
    return structure, meta, expected


MINIMAL_CIF = """\
data_test
_cell_length_a 4.0
_cell_length_b 4.0
_cell_length_c 4.0
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
_symmetry_space_group_name_H-M 'P 1'
loop_
_atom_site_label
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Cu1 Cu 0.0 0.0 0.0
"""


@pytest.fixture
def minimal_cif() -> str:
    return MINIMAL_CIF
