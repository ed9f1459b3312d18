"""CIF parsing, defect reporting, and round-trip serialization."""

import math

import numpy as np
import pytest

from catloop.cif import (
    AtomSite,
    DefectCode,
    FATAL_DEFECTS,
    Lattice,
    Structure,
    composition_of,
    frac_circle_distance,
    parse_cif,
    parse_number,
    serialize_cif,
    structures_close,
    wrap_fractional,
)
from conftest import MINIMAL_CIF, make_structure, random_structure


def edit(base: str, old: str, new: str) -> str:
    assert old in base
    return base.replace(old, new)


# ---------------------------------------------------------------------------
# happy path


def test_minimal_parse(minimal_cif):
    out = parse_cif(minimal_cif)
    assert out.ok
    assert out.defects == ()
    s = out.structure
    assert s.lattice.lengths == (4.0, 4.0, 4.0)
    assert s.lattice.angles == (90.0, 90.0, 90.0)
    assert s.space_group_symbol == "P 1"
    assert len(s.sites) == 1
    assert s.sites[0].element == "Cu"
    assert s.sites[0].label == "Cu1"
    assert out.coords_in_window


def test_uncertainty_suffix_stripped(minimal_cif):
    out = parse_cif(edit(minimal_cif, "_cell_length_a 4.0", "_cell_length_a 4.123(5)"))
    assert out.ok
    assert out.structure.lattice.a == 4.123


def test_parse_number_forms():
    assert parse_number("4.123(5)") == 4.123
    assert parse_number("-0.25") == -0.25
    assert parse_number("1e-3") == 1e-3
    assert parse_number("1.5D2") == 150.0
    assert parse_number(".5") == 0.5
    assert parse_number("12(3)") == 12.0
    assert parse_number("abc") is None
    assert parse_number("nan") is None
    assert parse_number("inf") is None
    assert parse_number("1.0.0") is None
    assert parse_number("") is None


def test_coordinates_wrapped(minimal_cif):
    out = parse_cif(edit(minimal_cif, "Cu1 Cu 0.0 0.0 0.0", "Cu1 Cu -0.25 1.25 0.5"))
    assert out.ok
    assert out.structure.sites[0].frac == (0.75, 0.25, 0.5)
    assert out.coords_in_window  # -0.25 and 1.25 are inside [-0.5, 1.5)


def test_out_of_window_coordinates_flagged(minimal_cif):
    out = parse_cif(edit(minimal_cif, "Cu1 Cu 0.0 0.0 0.0", "Cu1 Cu 1.7 0.0 0.0"))
    assert out.ok  # still parses; wrapping is lossy but defined
    assert not out.coords_in_window
    assert out.structure.sites[0].frac[0] == pytest.approx(0.7)


def test_case_insensitive_tags(minimal_cif):
    text = minimal_cif.replace("_cell_length_a", "_CELL_LENGTH_A").replace(
        "data_test", "DATA_test"
    )
    out = parse_cif(text)
    assert out.ok and out.defects == ()


def test_space_group_alias(minimal_cif):
    out = parse_cif(
        edit(
            minimal_cif,
            "_symmetry_space_group_name_H-M 'P 1'",
            "_space_group_name_H-M_alt 'F m -3 m'",
        )
    )
    assert out.ok
    assert out.structure.space_group_symbol == "F m -3 m"


def test_space_group_number_tag(minimal_cif):
    out = parse_cif(minimal_cif + "_symmetry_Int_Tables_number 225\n")
    assert out.ok
    assert out.structure.space_group_number == 225


def test_unknown_tags_preserved(minimal_cif):
    out = parse_cif(minimal_cif + "_chemical_name_common 'copper метал'\n")
    assert out.ok and out.defects == ()
    assert out.document.scalars["_chemical_name_common"] == "copper метал"


def test_semicolon_text_field(minimal_cif):
    text = minimal_cif + "_exptl_notes\n;\nfree text\nover lines\n;\n"
    out = parse_cif(text)
    assert out.ok and out.defects == ()
    assert "free text" in out.document.scalars["_exptl_notes"]


def test_bytes_input(minimal_cif):
    assert parse_cif(minimal_cif.encode()).ok
    # invalid utf-8 degrades, never raises
    assert parse_cif(b"\xff\xfe garbage").ok is False


def test_label_column_optional(minimal_cif):
    text = minimal_cif.replace("_atom_site_label\n", "").replace(
        "Cu1 Cu 0.0 0.0 0.0", "Cu 0.0 0.0 0.0"
    )
    out = parse_cif(text)
    assert out.ok
    assert out.structure.sites[0].label == "Cu1"  # auto-generated


# ---------------------------------------------------------------------------
# defects


@pytest.mark.parametrize(
    "mutate,code",
    [
        (lambda t: t.replace("data_test\n", ""), DefectCode.SYNTAX),
        (
            lambda t: edit(t, "loop_\n", "stray_value\nloop_\n"),
            DefectCode.SYNTAX,
        ),
        (lambda t: t + "_dup 1\n_dup 2\n", DefectCode.SYNTAX),
        (lambda t: t + "_bad 'unterminated\n", DefectCode.SYNTAX),
        (lambda t: t + "data_second\n", DefectCode.SYNTAX),
        (lambda t: edit(t, "_cell_length_b 4.0\n", ""), DefectCode.MISSING_LATTICE),
        (lambda t: edit(t, "_cell_length_a 4.0", "_cell_length_a abc"), DefectCode.BAD_NUMBER),
        (lambda t: edit(t, "_cell_angle_beta 90", "_cell_angle_beta 200"), DefectCode.BAD_NUMBER),
        (lambda t: edit(t, "Cu1 Cu 0.0", "Cu1 Cu x.0"), DefectCode.BAD_NUMBER),
        (lambda t: edit(t, "Cu1 Cu", "Xx1 Xx"), DefectCode.UNKNOWN_ELEMENT),
        (lambda t: edit(t, "Cu1 Cu 0.0 0.0 0.0\n", ""), DefectCode.INCONSISTENT_LOOP),
        (lambda t: edit(t, " 0.0\n", "\n"), DefectCode.INCONSISTENT_LOOP),
    ],
)
def test_fatal_defects(minimal_cif, mutate, code):
    out = parse_cif(mutate(minimal_cif))
    assert out.has(code), out.defects
    assert code in FATAL_DEFECTS
    assert not out.ok


def test_missing_atom_loop_is_empty_sites(minimal_cif):
    text = minimal_cif[: minimal_cif.index("loop_")]
    out = parse_cif(text)
    assert out.has(DefectCode.EMPTY_SITES)
    assert not out.ok


def test_missing_fract_column_is_empty_sites(minimal_cif):
    text = minimal_cif.replace("_atom_site_fract_z\n", "").replace(
        "Cu1 Cu 0.0 0.0 0.0", "Cu1 Cu 0.0 0.0"
    )
    out = parse_cif(text)
    assert out.has(DefectCode.EMPTY_SITES)
    assert not out.ok


def test_missing_space_group_nonfatal(minimal_cif):
    out = parse_cif(edit(minimal_cif, "_symmetry_space_group_name_H-M 'P 1'\n", ""))
    assert out.has(DefectCode.MISSING_SPACE_GROUP)
    assert out.ok  # non-fatal: structure still produced
    assert out.structure.space_group_symbol is None


def test_space_group_placeholder_is_not_a_defect(minimal_cif):
    # tag present with the unknown-value marker: no defect, but no symbol
    out = parse_cif(
        edit(minimal_cif, "_symmetry_space_group_name_H-M 'P 1'", "_symmetry_space_group_name_H-M ?")
    )
    assert out.ok and out.defects == ()
    assert out.structure.space_group_symbol is None


def test_duplicate_label_nonfatal(minimal_cif):
    out = parse_cif(
        minimal_cif + "Cu1 Cu 0.5 0.5 0.5\n"
    )
    assert out.has(DefectCode.DUPLICATE_LABEL)
    assert out.ok
    assert len(out.structure.sites) == 2


def test_defect_line_numbers(minimal_cif):
    out = parse_cif(edit(minimal_cif, "_cell_length_c 4.0", "_cell_length_c bogus"))
    (defect,) = [d for d in out.defects if d.code is DefectCode.BAD_NUMBER]
    assert defect.line == 4  # _cell_length_c sits on line 4


def test_failure_iff_fatal_defect(minimal_cif):
    rng = np.random.default_rng(20)
    corpus = [
        MINIMAL_CIF,
        MINIMAL_CIF.replace("data_test\n", ""),
        MINIMAL_CIF.replace("_symmetry_space_group_name_H-M 'P 1'\n", ""),
        MINIMAL_CIF + "Cu1 Cu 0.5 0.5 0.5\n",
        MINIMAL_CIF.replace("Cu", "Zz"),
    ]
    for _ in range(200):
        base = corpus[int(rng.integers(len(corpus)))]
        pos = int(rng.integers(0, len(base)))
        text = base[:pos] + base[pos + 1 :]  # drop one character
        out = parse_cif(text)
        assert out.ok == (not any(d.fatal for d in out.defects))


def test_oversize_input_rejected():
    out = parse_cif("x" * (1 << 20 + 1), max_chars=1 << 20)
    assert not out.ok
    assert out.has(DefectCode.SYNTAX)


def test_empty_input():
    out = parse_cif("")
    assert not out.ok
    assert out.has(DefectCode.SYNTAX)


# ---------------------------------------------------------------------------
# models


def test_lattice_validation():
    with pytest.raises(ValueError):
        Lattice(0.0, 4.0, 4.0, 90.0, 90.0, 90.0)
    with pytest.raises(ValueError):
        Lattice(4.0, 4.0, 4.0, 90.0, 180.0, 90.0)
    with pytest.raises(ValueError):
        Lattice(4.0, 4.0, 4.0, 1.0, 1.0, 170.0)  # impossible angle triple
    with pytest.raises(ValueError):
        Lattice(math.nan, 4.0, 4.0, 90.0, 90.0, 90.0)


def test_lattice_matrix_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(200):
        lengths = rng.uniform(1.0, 20.0, 3)
        angles = rng.uniform(40.0, 140.0, 3)
        try:
            lat = Lattice(*lengths, *angles)
        except ValueError:
            continue
        back = Lattice.from_matrix(lat.matrix)
        for p, q in zip(lat.lengths + lat.angles, back.lengths + back.angles):
            assert abs(p - q) <= 1e-9 * max(1.0, abs(p))


def test_lattice_volume_matches_determinant():
    lat = Lattice(3.0, 4.0, 5.0, 80.0, 95.0, 112.0)
    assert lat.volume == pytest.approx(abs(np.linalg.det(lat.matrix)), rel=1e-12)


def test_cubic_matrix_orientation():
    m = Lattice(4.0, 4.0, 4.0, 90.0, 90.0, 90.0).matrix
    assert np.allclose(m, np.diag([4.0, 4.0, 4.0]), atol=1e-12)


def test_atom_site_validation():
    with pytest.raises(ValueError):
        AtomSite(label="Q1", element="Qq", frac=(0, 0, 0))
    with pytest.raises(ValueError):
        AtomSite(label="", element="Cu", frac=(0, 0, 0))
    with pytest.raises(ValueError):
        AtomSite(label="Cu1", element="Cu", frac=(0, math.inf, 0))
    site = AtomSite(label="Cu1", element="Cu", frac=(-0.25, 1.25, 0.5))
    assert site.frac == (0.75, 0.25, 0.5)


def test_wrap_fractional_corner():
    assert wrap_fractional(0.5) == 0.5
    assert wrap_fractional(1.0) == 0.0
    assert wrap_fractional(-1e-17) == 0.0  # rounds up to 1.0, then wraps
    assert 0.0 <= wrap_fractional(-0.3) < 1.0


def test_structure_validation():
    lat = Lattice(4.0, 4.0, 4.0, 90.0, 90.0, 90.0)
    with pytest.raises(ValueError):
        Structure(lattice=lat, sites=())
    with pytest.raises(ValueError):
        Structure(
            lattice=lat,
            sites=(AtomSite("Cu1", "Cu", (0, 0, 0)),),
            space_group_number=231,
        )


def test_composition_of():
    s = make_structure(["Cu", "O", "Cu", "Cu"], np.random.default_rng(0).random((4, 3)))
    assert composition_of(s) == {"Cu": 3, "O": 1}
    assert list(composition_of(s)) == ["Cu", "O"]  # alphabetical keys


def test_frac_circle_distance():
    assert frac_circle_distance(0.1, 0.9) == pytest.approx(0.2)
    assert frac_circle_distance(0.9999999997, 0.0) <= 1e-9
    assert frac_circle_distance(0.5, 0.5) == 0.0


# ---------------------------------------------------------------------------
# serialization round trips


def test_serialize_reparse_zero_defects(minimal_cif):
    s = parse_cif(minimal_cif).structure
    out = parse_cif(serialize_cif(s))
    assert out.ok and out.defects == ()
    assert structures_close(s, out.structure)


def test_serialize_without_space_group_round_trips():
    s = make_structure(["Cu"], [(0.25, 0.25, 0.25)], space_group=None)
    text = serialize_cif(s)
    assert "_symmetry_space_group_name_H-M ?" in text
    out = parse_cif(text)
    assert out.ok and out.defects == ()
    assert out.structure.space_group_symbol is None


def test_serialize_block_name_from_composition():
    s = make_structure(["Cu", "Cu", "O"], [(0, 0, 0), (0.5, 0.5, 0.5), (0.25, 0.25, 0.25)])
    assert serialize_cif(s).startswith("data_Cu2O1\n")
    assert serialize_cif(s, block_name="custom").startswith("data_custom\n")


def test_serialize_quotes_awkward_labels():
    site = AtomSite(label="Cu 1", element="Cu", frac=(0, 0, 0))
    s = Structure(
        lattice=Lattice(4, 4, 4, 90, 90, 90),
        sites=(site,),
        space_group_symbol="P 1",
    )
    out = parse_cif(serialize_cif(s))
    assert out.ok and out.defects == ()
    assert out.structure.sites[0].label == "Cu 1"


def test_round_trip_random_structures():
    rng = np.random.default_rng(42)
    for _ in range(150):
        s = random_structure(rng)
        out = parse_cif(serialize_cif(s))
        assert out.ok
        assert out.defects == ()
        assert structures_close(s, out.structure, tol=1e-9)


def test_parse_is_pure(minimal_cif):
    a = parse_cif(minimal_cif)
    b = parse_cif(minimal_cif)
    assert a.defects == b.defects
    assert structures_close(a.structure, b.structure, tol=0.0)


def test_fuzz_never_raises():
    rng = np.random.default_rng(99)
    base = MINIMAL_CIF
    for k in range(3000):
        mode = k % 3
        if mode == 0:
            raw = bytes(rng.integers(0, 256, size=int(rng.integers(0, 200))))
            parse_cif(raw)
        elif mode == 1:
            chars = list(base)
            for _ in range(int(rng.integers(1, 8))):
                pos = int(rng.integers(len(chars)))
                chars[pos] = chr(int(rng.integers(32, 127)))
            parse_cif("".join(chars))
        else:
            cut = int(rng.integers(len(base)))
            parse_cif(base[cut:] + base[:cut])
