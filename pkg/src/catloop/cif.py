"""Reading and writing a crystal-description subset of the CIF format.

The supported subset is a single data block with the six cell tags
(`_cell_length_a/b/c`, `_cell_angle_alpha/beta/gamma`), an optional space
group (`_symmetry_space_group_name_H-M` or its `_space_group_name_H-M_alt`
alias, plus the integer table-number tags), and one `_atom_site_*` loop with
label / type_symbol / fract_x / fract_y / fract_z columns.  Unknown tags and
loops are kept in the parsed document but otherwise ignored.

Parsing never raises on malformed input.  Every problem is recorded as a
`Defect` with a code, a human-readable message, and a line number; a fatal
defect means no `Structure` is produced, while non-fatal defects still yield
one.  `parse_cif` is a pure function of its input text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .elements import COVALENT_RADII, normalize_symbol

DEFAULT_MAX_CHARS = 1 << 20  # parser input budget (~1 MiB of text)

_CELL_TAGS = (
    "_cell_length_a",
    "_cell_length_b",
    "_cell_length_c",
    "_cell_angle_alpha",
    "_cell_angle_beta",
    "_cell_angle_gamma",
)
_SPACE_GROUP_TAGS = ("_symmetry_space_group_name_h-m", "_space_group_name_h-m_alt")
_SPACE_GROUP_NUMBER_TAGS = ("_symmetry_int_tables_number", "_space_group_it_number")
_SITE_TAGS = (
    "_atom_site_label",
    "_atom_site_type_symbol",
    "_atom_site_fract_x",
    "_atom_site_fract_y",
    "_atom_site_fract_z",
)
_PLACEHOLDERS = {"?", "."}

_NUMBER_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eEdD][+-]?\d+)?)(\(\d+\))?$")


class DefectCode(str, Enum):
    """Classification codes for problems found while parsing."""

    SYNTAX = "SYNTAX"
    MISSING_LATTICE = "MISSING_LATTICE"
    BAD_NUMBER = "BAD_NUMBER"
    UNKNOWN_ELEMENT = "UNKNOWN_ELEMENT"
    EMPTY_SITES = "EMPTY_SITES"
    MISSING_SPACE_GROUP = "MISSING_SPACE_GROUP"
    DUPLICATE_LABEL = "DUPLICATE_LABEL"
    INCONSISTENT_LOOP = "INCONSISTENT_LOOP"


FATAL_DEFECTS: frozenset[DefectCode] = frozenset(
    {
        DefectCode.SYNTAX,
        DefectCode.MISSING_LATTICE,
        DefectCode.BAD_NUMBER,
        DefectCode.UNKNOWN_ELEMENT,
        DefectCode.EMPTY_SITES,
        DefectCode.INCONSISTENT_LOOP,
    }
)


@dataclass(frozen=True)
class Defect:
    """One recorded parsing problem."""

    code: DefectCode
    message: str
    line: int  # 1-based line number; 0 when no single line applies

    @property
    def fatal(self) -> bool:
        return self.code in FATAL_DEFECTS

    def to_json_dict(self) -> dict:
        return {"code": self.code.value, "message": self.message, "line": self.line}


@dataclass(frozen=True)
class CifLoop:
    """A `loop_` block: column tags plus rows of raw string values."""

    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]
    line: int  # line of the loop_ keyword
    row_lines: tuple[int, ...] = ()


@dataclass(frozen=True)
class CifDocument:
    """Lossless view of one parsed data block.

    `scalars` maps lowercased tags to raw (unconverted) values in file
    order; `loops` keeps every loop including unrecognized ones.  Treated
    as immutable after construction.
    """

    block_name: str
    scalars: dict[str, str]
    loops: tuple[CifLoop, ...]
    source_line_spans: dict[str, tuple[int, int]]


class RoleTag(str, Enum):
    """Structural role of a site within an adsorption system."""

    ADSORBATE = "adsorbate"
    SURFACE_TOP = "surface_top"
    SUBSURFACE = "subsurface"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class Lattice:
    """Cell parameters: lengths in angstroms, angles in degrees."""

    a: float
    b: float
    c: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"cell length {name}={v!r} must be finite and positive")
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 < v < 180.0):
                raise ValueError(f"cell angle {name}={v!r} must lie in (0, 180)")
        if self._volume_factor_sq() <= 0.0:
            raise ValueError("cell angles do not define a positive-volume cell")

    def _volume_factor_sq(self) -> float:
        ca = math.cos(math.radians(self.alpha))
        cb = math.cos(math.radians(self.beta))
        cg = math.cos(math.radians(self.gamma))
        return 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg

    @cached_property
    def matrix(self) -> np.ndarray:
        """3x3 row matrix of lattice vectors (standard orientation, read-only)."""
        ca = math.cos(math.radians(self.alpha))
        cb = math.cos(math.radians(self.beta))
        cg = math.cos(math.radians(self.gamma))
        sg = math.sin(math.radians(self.gamma))
        vfac = math.sqrt(self._volume_factor_sq())
        m = np.array(
            [
                [self.a, 0.0, 0.0],
                [self.b * cg, self.b * sg, 0.0],
                [self.c * cb, self.c * (ca - cb * cg) / sg, self.c * vfac / sg],
            ]
        )
        m.setflags(write=False)
        return m

    @property
    def volume(self) -> float:
        """Cell volume in cubic angstroms."""
        return self.a * self.b * self.c * math.sqrt(self._volume_factor_sq())

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (self.a, self.b, self.c)

    @property
    def angles(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Lattice":
        """Recover cell parameters from a 3x3 row matrix of lattice vectors."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("lattice matrix must be 3x3")
        lengths = np.linalg.norm(m, axis=1)
        if np.any(lengths <= 0) or not np.all(np.isfinite(m)):
            raise ValueError("lattice matrix rows must be finite and nonzero")

        def angle(i: int, j: int) -> float:
            cosang = float(np.dot(m[i], m[j]) / (lengths[i] * lengths[j]))
            return math.degrees(math.acos(max(-1.0, min(1.0, cosang))))

        return cls(
            a=float(lengths[0]),
            b=float(lengths[1]),
            c=float(lengths[2]),
            alpha=angle(1, 2),
            beta=angle(0, 2),
            gamma=angle(0, 1),
        )

    def fractional_to_cartesian(self, frac: np.ndarray) -> np.ndarray:
        """Map fractional coordinates (..., 3) to cartesian angstroms."""
        return np.asarray(frac, dtype=float) @ self.matrix


def wrap_fractional(value: float) -> float:
    """Wrap a fractional coordinate into the canonical [0, 1) window."""
    w = value % 1.0
    if w >= 1.0 or w < 0.0:  # guard the x % 1.0 == 1.0 rounding corner
        w = 0.0
    return w


@dataclass(frozen=True)
class AtomSite:
    """One atom: label, element symbol, fractional coordinates in [0, 1)."""

    label: str
    element: str
    frac: tuple[float, float, float]
    role_tag: RoleTag = RoleTag.UNSPECIFIED

    def __post_init__(self) -> None:
        if self.element not in COVALENT_RADII:
            raise ValueError(f"unknown element symbol {self.element!r}")
        if not self.label:
            raise ValueError("site label must be non-empty")
        if len(self.frac) != 3 or not all(math.isfinite(v) for v in self.frac):
            raise ValueError("fractional coordinates must be three finite numbers")
        object.__setattr__(self, "frac", tuple(wrap_fractional(v) for v in self.frac))


@dataclass(frozen=True)
class Structure:
    """A crystal: lattice, at least one site, optional space-group identity."""

    lattice: Lattice
    sites: tuple[AtomSite, ...]
    space_group_symbol: str | None = None
    space_group_number: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sites", tuple(self.sites))
        if not self.sites:
            raise ValueError("structure must contain at least one site")
        n = self.space_group_number
        if n is not None and not (1 <= n <= 230):
            raise ValueError(f"space group number {n} outside 1..230")

    def frac_coords(self) -> np.ndarray:
        """Fractional coordinates as an (N, 3) array."""
        return np.array([s.frac for s in self.sites], dtype=float)

    def __len__(self) -> int:
        return len(self.sites)


def composition_of(structure: Structure) -> dict[str, int]:
    """Element -> count for the structure, keys sorted alphabetically."""
    counts: dict[str, int] = {}
    for site in structure.sites:
        counts[site.element] = counts.get(site.element, 0) + 1
    return {el: counts[el] for el in sorted(counts)}


@dataclass(frozen=True)
class ParseOutcome:
    """Everything `parse_cif` learned: structure (or None), defects, document."""

    structure: Structure | None
    defects: tuple[Defect, ...]
    document: CifDocument | None
    coords_in_window: bool  # were all source coordinates already in [-0.5, 1.5)?

    @property
    def ok(self) -> bool:
        return self.structure is not None

    def has(self, code: DefectCode) -> bool:
        return any(d.code is code for d in self.defects)

    def defect_codes(self) -> tuple[str, ...]:
        return tuple(d.code.value for d in self.defects)


# ---------------------------------------------------------------------------
# tokenizer


@dataclass
class _Token:
    text: str
    line: int
    quoted: bool = False


def _tokenize(lines: list[str], defects: list[Defect]) -> list[_Token]:
    """Split CIF text into value tokens, honoring quotes, comments, and
    semicolon-delimited text fields."""
    tokens: list[_Token] = []
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        lineno = i + 1
        if line.startswith(";"):
            # multiline text field: collect until a line starting with ';'
            block: list[str] = [line[1:]]
            j = i + 1
            closed = False
            while j < n:
                if lines[j].startswith(";"):
                    closed = True
                    break
                block.append(lines[j])
                j += 1
            if not closed:
                defects.append(
                    Defect(DefectCode.SYNTAX, "unterminated text field", lineno)
                )
                i = n
                continue
            tokens.append(_Token("\n".join(block).strip(), lineno, quoted=True))
            i = j + 1
            continue
        pos = 0
        ln = len(line)
        while pos < ln:
            ch = line[pos]
            if ch in " \t":
                pos += 1
                continue
            if ch == "#":
                break
            if ch in "'\"":
                end = line.find(ch, pos + 1)
                if end < 0:
                    defects.append(
                        Defect(DefectCode.SYNTAX, "unterminated quoted value", lineno)
                    )
                    pos = ln
                    continue
                tokens.append(_Token(line[pos + 1 : end], lineno, quoted=True))
                pos = end + 1
                continue
            end = pos
            while end < ln and line[end] not in " \t":
                end += 1
            tokens.append(_Token(line[pos:end], lineno))
            pos = end
        i += 1
    return tokens


def parse_number(raw: str) -> float | None:
    """Parse a CIF numeric value, stripping an uncertainty suffix like 4.123(5).

    Returns None when the value is not a plain number.
    """
    m = _NUMBER_RE.match(raw.strip())
    if not m:
        return None
    mantissa = m.group(1).replace("d", "e").replace("D", "e")
    try:
        value = float(mantissa)
    except ValueError:  # pragma: no cover - regex already constrains this
        return None
    return value if math.isfinite(value) else None


# ---------------------------------------------------------------------------
# parser


def _is_reserved(tok: _Token) -> bool:
    if tok.quoted:
        return False
    low = tok.text.lower()
    return low.startswith("data_") or low == "loop_" or tok.text.startswith("_")


def _parse_document(
    text: str, defects: list[Defect]
) -> CifDocument | None:
    lines = text.splitlines()
    tokens = _tokenize(lines, defects)

    # locate the data block header
    start = None
    for idx, tok in enumerate(tokens):
        if not tok.quoted and tok.text.lower().startswith("data_"):
            start = idx
            break
    if start is None:
        defects.append(Defect(DefectCode.SYNTAX, "missing data block header", 0))
        return None
    if start > 0:
        defects.append(
            Defect(
                DefectCode.SYNTAX,
                "content before data block header",
                tokens[0].line,
            )
        )
    block_name = tokens[start].text[len("data_") :]

    scalars: dict[str, str] = {}
    loops: list[CifLoop] = []
    spans: dict[str, tuple[int, int]] = {}

    i = start + 1
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        low = tok.text.lower() if not tok.quoted else ""
        if not tok.quoted and low.startswith("data_"):
            defects.append(
                Defect(DefectCode.SYNTAX, "multiple data blocks", tok.line)
            )
            break
        if low == "loop_":
            loop_line = tok.line
            i += 1
            columns: list[str] = []
            while i < n and not tokens[i].quoted and tokens[i].text.startswith("_"):
                columns.append(tokens[i].text.lower())
                i += 1
            if not columns:
                defects.append(
                    Defect(DefectCode.SYNTAX, "loop without column tags", loop_line)
                )
                continue
            if len(set(columns)) != len(columns):
                defects.append(
                    Defect(
                        DefectCode.INCONSISTENT_LOOP,
                        "duplicate column tag in loop",
                        loop_line,
                    )
                )
            values: list[_Token] = []
            while i < n and not _is_reserved(tokens[i]):
                values.append(tokens[i])
                i += 1
            ncol = len(columns)
            if not values:
                defects.append(
                    Defect(DefectCode.INCONSISTENT_LOOP, "loop has no data rows", loop_line)
                )
            elif len(values) % ncol != 0:
                defects.append(
                    Defect(
                        DefectCode.INCONSISTENT_LOOP,
                        f"loop value count {len(values)} is not a multiple of "
                        f"{ncol} columns",
                        values[-1].line,
                    )
                )
            nrows = len(values) // ncol
            rows = tuple(
                tuple(values[r * ncol + c].text for c in range(ncol))
                for r in range(nrows)
            )
            row_lines = tuple(values[r * ncol].line for r in range(nrows))
            end_line = values[-1].line if values else loop_line
            loops.append(CifLoop(tuple(columns), rows, loop_line, row_lines))
            for col in columns:
                spans.setdefault(col, (loop_line, end_line))
            continue
        if not tok.quoted and tok.text.startswith("_"):
            tag = tok.text.lower()
            if i + 1 < n and not _is_reserved(tokens[i + 1]):
                value = tokens[i + 1].text
                if tag in scalars:
                    defects.append(
                        Defect(
                            DefectCode.SYNTAX,
                            f"duplicate tag {tag}",
                            tok.line,
                        )
                    )
                else:
                    scalars[tag] = value
                    spans[tag] = (tok.line, tokens[i + 1].line)
                i += 2
            else:
                defects.append(
                    Defect(DefectCode.SYNTAX, f"tag {tag} has no value", tok.line)
                )
                i += 1
            continue
        defects.append(
            Defect(
                DefectCode.SYNTAX,
                f"unexpected value {tok.text!r} outside any loop",
                tok.line,
            )
        )
        i += 1

    return CifDocument(block_name, scalars, tuple(loops), spans)


def find_atom_site_loop(document: CifDocument) -> CifLoop | None:
    """First loop carrying any `_atom_site_*` column of the supported subset."""
    for loop in document.loops:
        if any(col in _SITE_TAGS for col in loop.columns):
            return loop
    return None


def _tag_line(document: CifDocument, tag: str) -> int:
    span = document.source_line_spans.get(tag)
    return span[0] if span else 0


def _parse_lattice(document: CifDocument, defects: list[Defect]) -> Lattice | None:
    missing = [t for t in _CELL_TAGS if t not in document.scalars]
    if missing:
        defects.append(
            Defect(
                DefectCode.MISSING_LATTICE,
                "missing cell tags: " + ", ".join(missing),
                0,
            )
        )
        return None
    values: dict[str, float] = {}
    bad = False
    for tag in _CELL_TAGS:
        raw = document.scalars[tag]
        num = parse_number(raw)
        if num is None:
            defects.append(
                Defect(
                    DefectCode.BAD_NUMBER,
                    f"{tag} value {raw!r} is not numeric",
                    _tag_line(document, tag),
                )
            )
            bad = True
            continue
        is_angle = "angle" in tag
        if (is_angle and not 0.0 < num < 180.0) or (not is_angle and num <= 0.0):
            defects.append(
                Defect(
                    DefectCode.BAD_NUMBER,
                    f"{tag} value {num} outside physical range",
                    _tag_line(document, tag),
                )
            )
            bad = True
            continue
        values[tag] = num
    if bad:
        return None
    try:
        return Lattice(
            a=values["_cell_length_a"],
            b=values["_cell_length_b"],
            c=values["_cell_length_c"],
            alpha=values["_cell_angle_alpha"],
            beta=values["_cell_angle_beta"],
            gamma=values["_cell_angle_gamma"],
        )
    except ValueError as exc:
        defects.append(Defect(DefectCode.BAD_NUMBER, str(exc), 0))
        return None


def _parse_space_group(
    document: CifDocument, defects: list[Defect]
) -> tuple[str | None, int | None]:
    symbol: str | None = None
    tag_present = False
    for tag in _SPACE_GROUP_TAGS:
        if tag in document.scalars:
            tag_present = True
            raw = document.scalars[tag].strip()
            if raw and raw not in _PLACEHOLDERS:
                symbol = raw
            break
    number: int | None = None
    for tag in _SPACE_GROUP_NUMBER_TAGS:
        if tag in document.scalars:
            tag_present = True
            raw = document.scalars[tag].strip()
            num = parse_number(raw)
            if num is not None and float(num).is_integer() and 1 <= int(num) <= 230:
                number = int(num)
            break
    if not tag_present:
        defects.append(
            Defect(DefectCode.MISSING_SPACE_GROUP, "no space group tag", 0)
        )
    return symbol, number


def _parse_sites(
    document: CifDocument, defects: list[Defect]
) -> tuple[list[AtomSite] | None, bool]:
    """Return (sites or None, coords_in_window)."""
    loop = find_atom_site_loop(document)
    if loop is None:
        defects.append(Defect(DefectCode.EMPTY_SITES, "no atom site loop", 0))
        return None, True
    col_index = {col: k for k, col in enumerate(loop.columns)}
    fract_cols = ("_atom_site_fract_x", "_atom_site_fract_y", "_atom_site_fract_z")
    missing = [c for c in fract_cols if c not in col_index]
    has_label = "_atom_site_label" in col_index
    has_type = "_atom_site_type_symbol" in col_index
    if missing or not (has_label or has_type):
        what = list(missing)
        if not (has_label or has_type):
            what.append("_atom_site_label/_atom_site_type_symbol")
        defects.append(
            Defect(
                DefectCode.EMPTY_SITES,
                "atom site loop unusable, missing: " + ", ".join(what),
                loop.line,
            )
        )
        return None, True
    if not loop.rows:
        defects.append(
            Defect(DefectCode.EMPTY_SITES, "atom site loop has no rows", loop.line)
        )
        return None, True

    sites: list[AtomSite] = []
    coords_in_window = True
    fatal = False
    element_counts: dict[str, int] = {}
    seen_labels: set[str] = set()
    for row, row_line in zip(loop.rows, loop.row_lines):
        coords: list[float] = []
        row_ok = True
        for col in fract_cols:
            raw = row[col_index[col]]
            num = parse_number(raw)
            if num is None:
                defects.append(
                    Defect(
                        DefectCode.BAD_NUMBER,
                        f"{col} value {raw!r} is not numeric",
                        row_line,
                    )
                )
                fatal = True
                row_ok = False
                continue
            if not (-0.5 <= num < 1.5):
                coords_in_window = False
            coords.append(num)
        element: str | None = None
        source = ""
        if has_type:
            source = row[col_index["_atom_site_type_symbol"]]
            element = normalize_symbol(source)
        if element is None and has_label:
            source = row[col_index["_atom_site_label"]]
            element = normalize_symbol(source)
        if element is None:
            defects.append(
                Defect(
                    DefectCode.UNKNOWN_ELEMENT,
                    f"no element recognized in {source!r}",
                    row_line,
                )
            )
            fatal = True
            row_ok = False
        if not row_ok:
            continue
        assert element is not None
        element_counts[element] = element_counts.get(element, 0) + 1
        if has_label:
            label = row[col_index["_atom_site_label"]]
        else:
            label = f"{element}{element_counts[element]}"
        if label in seen_labels:
            defects.append(
                Defect(
                    DefectCode.DUPLICATE_LABEL,
                    f"duplicate site label {label!r}",
                    row_line,
                )
            )
        seen_labels.add(label)
        sites.append(
            AtomSite(label=label, element=element, frac=(coords[0], coords[1], coords[2]))
        )
    if fatal:
        return None, coords_in_window
    if not sites:
        defects.append(
            Defect(DefectCode.EMPTY_SITES, "no usable atom sites", loop.line)
        )
        return None, coords_in_window
    return sites, coords_in_window


def parse_cif(
    text: str | bytes, max_chars: int = DEFAULT_MAX_CHARS
) -> ParseOutcome:
    """Parse CIF text into a `ParseOutcome`; never raises on bad input."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    defects: list[Defect] = []
    if len(text) > max_chars:
        defects.append(
            Defect(
                DefectCode.SYNTAX,
                f"input length {len(text)} exceeds limit {max_chars}",
                0,
            )
        )
        return ParseOutcome(None, tuple(defects), None, True)

    document = _parse_document(text, defects)
    if document is None:
        return ParseOutcome(None, tuple(defects), None, True)

    lattice = _parse_lattice(document, defects)
    symbol, number = _parse_space_group(document, defects)
    sites, coords_in_window = _parse_sites(document, defects)

    structure: Structure | None = None
    if lattice is not None and sites is not None and not any(
        d.fatal for d in defects
    ):
        structure = Structure(
            lattice=lattice,
            sites=tuple(sites),
            space_group_symbol=symbol,
            space_group_number=number,
        )
    return ParseOutcome(structure, tuple(defects), document, coords_in_window)


# ---------------------------------------------------------------------------
# serializer


def _quote(value: str) -> str:
    if value == "" or any(ch in value for ch in " \t'\"#"):
        quote = '"' if "'" in value else "'"
        return f"{quote}{value}{quote}"
    return value


def _format_block_name(structure: Structure) -> str:
    comp = composition_of(structure)
    return "".join(f"{el}{n}" for el, n in comp.items())


def serialize_cif(structure: Structure, block_name: str | None = None) -> str:
    """Render a structure as CIF text that re-parses without defects.

    Numbers are written with nine decimal places.  A structure without a
    space group is written with the CIF unknown-value marker `?` so the tag
    stays present.  Role tags are sidecar metadata and are not written.
    """
    if block_name is None:
        block_name = _format_block_name(structure)
    lat = structure.lattice
    lines = [f"data_{block_name}"]
    for tag, value in zip(_CELL_TAGS, (*lat.lengths, *lat.angles)):
        lines.append(f"{tag} {value:.9f}")
    sg = structure.space_group_symbol
    lines.append(
        "_symmetry_space_group_name_H-M " + (_quote(sg) if sg is not None else "?")
    )
    if structure.space_group_number is not None:
        lines.append(f"_symmetry_Int_Tables_number {structure.space_group_number}")
    lines.append("loop_")
    lines.extend(
        (
            "_atom_site_label",
            "_atom_site_type_symbol",
            "_atom_site_fract_x",
            "_atom_site_fract_y",
            "_atom_site_fract_z",
        )
    )
    for site in structure.sites:
        x, y, z = site.frac
        lines.append(
            f"{_quote(site.label)} {site.element} {x:.9f} {y:.9f} {z:.9f}"
        )
    return "\n".join(lines) + "\n"


def frac_circle_distance(u: float, v: float) -> float:
    """Distance between two fractional coordinates on the unit circle."""
    d = abs(u - v) % 1.0
    return min(d, 1.0 - d)


def structures_close(
    s1: Structure, s2: Structure, tol: float = 1e-9
) -> bool:
    """Site-by-site equality of two structures within `tol`.

    Compares cell parameters, site order, labels, elements, and fractional
    coordinates modulo 1.  Role tags and space-group fields are ignored by
    coordinate comparison but symbol/number must match exactly.
    """
    if len(s1.sites) != len(s2.sites):
        return False
    if s1.space_group_symbol != s2.space_group_symbol:
        return False
    if s1.space_group_number != s2.space_group_number:
        return False
    for p, q in zip(
        s1.lattice.lengths + s1.lattice.angles, s2.lattice.lengths + s2.lattice.angles
    ):
        if abs(p - q) > tol:
            return False
    for a, b in zip(s1.sites, s2.sites):
        if a.label != b.label or a.element != b.element:
            return False
        for u, v in zip(a.frac, b.frac):
            if frac_circle_distance(u, v) > tol:
                return False
    return True
