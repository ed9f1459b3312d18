"""Multi-term reward for generated crystal text.

A candidate CIF string is scored on four sub-scales, each in [0, 1]:

* parse      - did the text parse into a structure at all,
* validity   - six-item formatting checklist on the parsed document,
* composition - L1 agreement between target and actual element counts,
* physics    - interatomic-distance and volume-per-atom sanity.

The total is the weighted sum of the four.  Failure flags classify what
went wrong: PF (parse failure), VF (validity violation), CM (composition
mismatch), PV (physics violation).  A parse failure zeroes every downstream
sub-score, so PF implies total = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .cif import (
    DefectCode,
    ParseOutcome,
    Structure,
    composition_of,
    find_atom_site_loop,
    parse_cif,
)
from .elements import COVALENT_RADII
from .geometry import DegenerateCellError, iter_periodic_pairs, volume_per_atom

CompositionVector = Mapping[str, int]

_SITE_COLUMNS = (
    "_atom_site_label",
    "_atom_site_type_symbol",
    "_atom_site_fract_x",
    "_atom_site_fract_y",
    "_atom_site_fract_z",
)
_CELL_TAGS = (
    "_cell_length_a",
    "_cell_length_b",
    "_cell_length_c",
    "_cell_angle_alpha",
    "_cell_angle_beta",
    "_cell_angle_gamma",
)

N_VALIDITY_CHECKS = 6


class FailureMode(str, Enum):
    """Coarse classification of scoring failures."""

    PARSE_FAILURE = "PF"
    VALIDITY_FAILURE = "VF"
    COMPOSITION_MISMATCH = "CM"
    PHYSICS_VIOLATION = "PV"


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the four sub-scores; must be non-negative and sum to 1."""

    comp: float = 0.6
    parse: float = 0.2
    valid: float = 0.1
    phys: float = 0.1

    def __post_init__(self) -> None:
        vals = (self.comp, self.parse, self.valid, self.phys)
        if any(not (math.isfinite(w) and w >= 0.0) for w in vals):
            raise ValueError("weights must be finite and non-negative")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(vals)!r}")

    def normalized_copy(self, **overrides: float) -> "RewardWeights":
        """New weights with the given raw values, renormalized to sum 1."""
        raw = {
            "comp": self.comp,
            "parse": self.parse,
            "valid": self.valid,
            "phys": self.phys,
        }
        raw.update(overrides)
        total = sum(raw.values())
        if total <= 0.0:
            raise ValueError("weights must have a positive sum")
        return RewardWeights(**{k: v / total for k, v in raw.items()})


@dataclass(frozen=True)
class PhysConfig:
    """Thresholds for the physics sub-score.

    Distances below `hard_overlap_fraction` of the covalent-radius sum score
    zero; at `full_credit_fraction` and above they score one, with a linear
    ramp in between.  Volume per atom scores one inside
    [vpa_min, vpa_max] cubic angstroms and decays linearly to zero over one
    decade (factor 10) outside on either side.
    """

    hard_overlap_fraction: float = 0.5
    full_credit_fraction: float = 0.75
    vpa_min: float = 3.0
    vpa_max: float = 200.0

    def __post_init__(self) -> None:
        if not 0.0 < self.hard_overlap_fraction < self.full_credit_fraction:
            raise ValueError("need 0 < hard_overlap_fraction < full_credit_fraction")
        if not 0.0 < self.vpa_min < self.vpa_max:
            raise ValueError("need 0 < vpa_min < vpa_max")


DEFAULT_WEIGHTS = RewardWeights()
DEFAULT_PHYS = PhysConfig()


@dataclass(frozen=True)
class RewardBreakdown:
    """Sub-scores, weighted total, failure flags, and diagnostics."""

    s_parse: float
    s_valid: float
    s_comp: float
    s_phys: float
    total: float
    failure_flags: frozenset[FailureMode]
    diagnostics: tuple[str, ...] = ()

    def flag_codes(self) -> list[str]:
        return sorted(f.value for f in self.failure_flags)

    def to_json_dict(self) -> dict:
        return {
            "s_parse": self.s_parse,
            "s_valid": self.s_valid,
            "s_comp": self.s_comp,
            "s_phys": self.s_phys,
            "total": self.total,
            "failure_flags": self.flag_codes(),
            "diagnostics": list(self.diagnostics),
        }


def score_parse(outcome: ParseOutcome) -> float:
    """1.0 when a structure was produced, else 0.0."""
    return 1.0 if outcome.ok else 0.0


def validity_checklist(outcome: ParseOutcome) -> list[tuple[str, bool]]:
    """The six named formatting checks behind the validity sub-score."""
    doc = outcome.document
    s = outcome.structure
    sg_ok = s is not None and (
        s.space_group_symbol is not None or s.space_group_number is not None
    )
    cell_ok = doc is not None and all(t in doc.scalars for t in _CELL_TAGS)
    loop = find_atom_site_loop(doc) if doc is not None else None
    columns_ok = loop is not None and all(c in loop.columns for c in _SITE_COLUMNS)
    labels_ok = not outcome.has(DefectCode.DUPLICATE_LABEL)
    loops_ok = not outcome.has(DefectCode.INCONSISTENT_LOOP)
    return [
        ("space_group_present", sg_ok),
        ("cell_tags_explicit", cell_ok),
        ("site_columns_complete", columns_ok),
        ("site_labels_unique", labels_ok),
        ("loops_consistent", loops_ok),
        ("coordinates_in_window", outcome.coords_in_window),
    ]


def score_valid(outcome: ParseOutcome) -> float:
    """1 - violations/6 over the formatting checklist, clamped at 0."""
    if not outcome.ok:
        return 0.0
    violations = sum(1 for _, ok in validity_checklist(outcome) if not ok)
    return max(0.0, 1.0 - violations / N_VALIDITY_CHECKS)


def score_composition(target: CompositionVector, actual: CompositionVector) -> float:
    """1 - sum|t_e - a_e| / (sum t + sum a), clamped to [0, 1].

    Both vectors empty scores 1.0 by convention.
    """
    for name, comp in (("target", target), ("actual", actual)):
        for el, cnt in comp.items():
            if cnt < 0:
                raise ValueError(f"negative count {cnt} for {el!r} in {name}")
    denom = sum(target.values()) + sum(actual.values())
    if denom == 0:
        return 1.0
    elements = set(target) | set(actual)
    diff = sum(abs(target.get(el, 0) - actual.get(el, 0)) for el in elements)
    return min(1.0, max(0.0, 1.0 - diff / denom))


def _distance_factor(
    structure: Structure, radii: Mapping[str, float], cfg: PhysConfig
) -> tuple[float, list[str]]:
    """Worst-pair distance credit: 0 below hard overlap, 1 above full credit."""
    notes: list[str] = []
    elems = [s.element for s in structure.sites]
    r = [radii[e] for e in elems]
    # Pair cutoffs at full credit: distances above carry no penalty, so only
    # pairs inside them matter.
    rr = np.array(r)
    cut = cfg.full_credit_fraction * (rr[:, None] + rr[None, :])
    factor = 1.0
    worst: tuple[float, int, int] | None = None
    for i, j, _image, dist in iter_periodic_pairs(structure, cut):
        rsum = r[i] + r[j]
        lo = cfg.hard_overlap_fraction * rsum
        hi = cfg.full_credit_fraction * rsum
        if dist <= lo:
            credit = 0.0
        else:
            credit = (dist - lo) / (hi - lo)
        if credit < factor:
            factor = credit
            worst = (dist, i, j)
    if worst is not None:
        dist, i, j = worst
        notes.append(
            f"closest pair {elems[i]}{i}-{elems[j]}{j} at {dist:.3f} A "
            f"scores {factor:.3f}"
        )
    return factor, notes


def _volume_factor(structure: Structure, cfg: PhysConfig) -> tuple[float, list[str]]:
    """Volume-per-atom credit: 1 in range, linear decade decay outside."""
    vpa = volume_per_atom(structure)
    if cfg.vpa_min <= vpa <= cfg.vpa_max:
        return 1.0, []
    if vpa < cfg.vpa_min:
        # full decade below: vpa_min/10 scores 0
        span = cfg.vpa_min - cfg.vpa_min / 10.0
        factor = max(0.0, (vpa - cfg.vpa_min / 10.0) / span)
    else:
        span = cfg.vpa_max * 10.0 - cfg.vpa_max
        factor = max(0.0, (cfg.vpa_max * 10.0 - vpa) / span)
    return factor, [f"volume per atom {vpa:.3f} A^3 outside range scores {factor:.3f}"]


def _assess_physical(
    structure: Structure,
    radii: Mapping[str, float] = COVALENT_RADII,
    cfg: PhysConfig = DEFAULT_PHYS,
) -> tuple[float, list[str]]:
    try:
        d_factor, d_notes = _distance_factor(structure, radii, cfg)
        v_factor, v_notes = _volume_factor(structure, cfg)
    except DegenerateCellError:
        return 0.0, ["degenerate cell: volume too small for distance checks"]
    return d_factor * v_factor, d_notes + v_notes


def score_physical(
    structure: Structure,
    radii: Mapping[str, float] = COVALENT_RADII,
    cfg: PhysConfig = DEFAULT_PHYS,
) -> float:
    """Distance factor times volume factor, each in [0, 1]."""
    return _assess_physical(structure, radii, cfg)[0]


def passes_hard_constraints(
    structure: Structure,
    radii: Mapping[str, float] = COVALENT_RADII,
    cfg: PhysConfig = DEFAULT_PHYS,
) -> bool:
    """True when no pair sits at or below the hard-overlap distance."""
    elems = [s.element for s in structure.sites]
    rr = np.array([radii[e] for e in elems])
    cut = cfg.hard_overlap_fraction * (rr[:, None] + rr[None, :])
    try:
        return not iter_periodic_pairs(structure, cut)
    except DegenerateCellError:
        return False


def pvcp_from_outcome(
    outcome: ParseOutcome,
    target: CompositionVector,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    phys: PhysConfig = DEFAULT_PHYS,
    radii: Mapping[str, float] = COVALENT_RADII,
) -> RewardBreakdown:
    """Score an already-parsed candidate (see `pvcp`)."""
    diagnostics: list[str] = []
    flags: set[FailureMode] = set()
    s_parse = score_parse(outcome)
    if not outcome.ok:
        flags.add(FailureMode.PARSE_FAILURE)
        diagnostics.extend(
            f"{d.code.value} line {d.line}: {d.message}" for d in outcome.defects
        )
        return RewardBreakdown(
            s_parse=0.0,
            s_valid=0.0,
            s_comp=0.0,
            s_phys=0.0,
            total=0.0,
            failure_flags=frozenset(flags),
            diagnostics=tuple(diagnostics),
        )
    structure = outcome.structure
    assert structure is not None
    s_valid = score_valid(outcome)
    if s_valid < 1.0:
        flags.add(FailureMode.VALIDITY_FAILURE)
        diagnostics.extend(
            f"validity check failed: {name}"
            for name, ok in validity_checklist(outcome)
            if not ok
        )
    s_comp = score_composition(target, composition_of(structure))
    if s_comp < 1.0:
        flags.add(FailureMode.COMPOSITION_MISMATCH)
        diagnostics.append(
            f"composition {composition_of(structure)} vs target {dict(target)}"
        )
    s_phys, phys_notes = _assess_physical(structure, radii, phys)
    if s_phys < 1.0:
        flags.add(FailureMode.PHYSICS_VIOLATION)
        diagnostics.extend(phys_notes)
    total = (
        weights.comp * s_comp
        + weights.parse * s_parse
        + weights.valid * s_valid
        + weights.phys * s_phys
    )
    total = min(1.0, max(0.0, total))
    return RewardBreakdown(
        s_parse=s_parse,
        s_valid=s_valid,
        s_comp=s_comp,
        s_phys=s_phys,
        total=total,
        failure_flags=frozenset(flags),
        diagnostics=tuple(diagnostics),
    )


def pvcp(
    text: str | bytes,
    target: CompositionVector,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    phys: PhysConfig = DEFAULT_PHYS,
    radii: Mapping[str, float] = COVALENT_RADII,
) -> RewardBreakdown:
    """Parse candidate CIF text and score it against a target composition."""
    return pvcp_from_outcome(parse_cif(text), target, weights, phys, radii)


def corpus_failure_rates(breakdowns: Iterable[RewardBreakdown]) -> dict[str, float]:
    """Percentage of candidates carrying each failure flag."""
    counts = {mode: 0 for mode in FailureMode}
    n = 0
    for br in breakdowns:
        n += 1
        for mode in br.failure_flags:
            counts[mode] += 1
    if n == 0:
        return {mode.value: 0.0 for mode in FailureMode}
    return {mode.value: 100.0 * counts[mode] / n for mode in FailureMode}
