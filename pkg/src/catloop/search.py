"""Closed-loop exemplar-pool search over generated crystal text.

The loop couples two pluggable pieces: a `CandidateGenerator` that emits
CIF text (optionally conditioned on an exemplar structure) and an
`EnergyPredictor` that maps a parsed structure to a formation-energy
estimate in eV.  Candidates are scored by a combined reward

    R = energy_weight * exp(-lambda * |E_pred - E_target|)
        + pvcp_weight * R_pvcp

and a fixed-capacity pool keeps the best hard-constraint-passing exemplars.
Each iteration samples one exemplar uniformly, generates mutated candidates
from it, and admits a candidate only when its score beats the current pool
minimum (replacing that minimum), so the pool minimum never decreases.

Two desk-scale reference implementations are included: a covalent-radius
parameterized pair-potential surrogate and a mutation-based generator that
can deliberately inject classed defects for calibration corpora.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, runtime_checkable

import numpy as np

from .cif import AtomSite, Lattice, RoleTag, Structure, parse_cif, serialize_cif
from .elements import COVALENT_RADII
from .geometry import iter_periodic_pairs
from .reward import (
    DEFAULT_PHYS,
    DEFAULT_WEIGHTS,
    CompositionVector,
    PhysConfig,
    RewardBreakdown,
    RewardWeights,
    passes_hard_constraints,
    pvcp_from_outcome,
)

_SIXTH_ROOT_OF_TWO = 2.0 ** (1.0 / 6.0)

# substream ids for per-seed random draws inside MutationGenerator
_STREAM_GEOMETRY = 0
_STREAM_SYNTAX = 1
_STREAM_MISSING_FIELD = 2
_STREAM_COMPOSITION = 3
_STREAM_OVERLAP = 4


@runtime_checkable
class EnergyPredictor(Protocol):
    """Anything that maps a structure to a formation-energy estimate (eV)."""

    def predict(self, structure: Structure) -> float: ...


@runtime_checkable
class CandidateGenerator(Protocol):
    """Anything that emits candidate CIF text.

    `exemplar` is None for unconditioned generation; otherwise candidates
    should stay near the exemplar.  `rng_seed` fully determines the output.
    """

    def propose(
        self,
        exemplar: Structure | None,
        target: CompositionVector,
        rng_seed: int,
    ) -> str: ...


def energy_reward(e_pred: float, e_target: float, lambda_energy: float) -> float:
    """exp(-lambda * |e_pred - e_target|); in (0, 1], 1 iff exact match."""
    if lambda_energy <= 0.0 or not math.isfinite(lambda_energy):
        raise ValueError("lambda_energy must be positive and finite")
    if not (math.isfinite(e_pred) and math.isfinite(e_target)):
        raise ValueError("energies must be finite")
    return math.exp(-lambda_energy * abs(e_pred - e_target))


# ---------------------------------------------------------------------------
# desk-scale surrogates


@dataclass
class PairPotentialSurrogate:
    """12-6 pair potential parameterized by covalent radii.

    For a pair with radii r_i, r_j the well minimum sits at r_i + r_j
    (sigma = (r_i + r_j) / 2^(1/6)) and the well depth is
    depth_scale * (r_i + r_j) / 2 in eV.  Interactions are summed over all
    periodic pairs within `cutoff` angstroms; each pair term is clamped at
    `bond_cap` so near-coincident atoms give a large but finite energy.
    Deterministic: equal structures always give equal energies.
    """

    radii: Mapping[str, float] = field(default_factory=lambda: COVALENT_RADII)
    depth_scale: float = 0.4  # eV per angstrom of radius sum
    cutoff: float = 6.0  # angstroms
    bond_cap: float = 1e3  # eV

    def predict(self, structure: Structure) -> float:
        r = np.array([self.radii[s.element] for s in structure.sites])
        total = 0.0
        for i, j, _image, dist in iter_periodic_pairs(structure, self.cutoff):
            rsum = r[i] + r[j]
            eps = self.depth_scale * rsum / 2.0
            sigma = rsum / _SIXTH_ROOT_OF_TWO
            if dist < 1e-9:
                total += self.bond_cap
                continue
            x6 = (sigma / dist) ** 6
            total += min(self.bond_cap, 4.0 * eps * (x6 * x6 - x6))
        return total


@dataclass(frozen=True)
class DefectRates:
    """Per-class probabilities of deliberately corrupting a candidate."""

    syntax: float = 0.0
    missing_field: float = 0.0
    composition: float = 0.0
    overlap: float = 0.0

    def __post_init__(self) -> None:
        for name in ("syntax", "missing_field", "composition", "overlap"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} rate must lie in [0, 1], got {v!r}")


def _grid_dims(n: int) -> tuple[int, int, int]:
    nx = math.ceil(n ** (1.0 / 3.0))
    ny = math.ceil(math.sqrt(n / nx))
    nz = math.ceil(n / (nx * ny))
    return nx, ny, nz


@dataclass
class MutationGenerator:
    """Grid placement plus jitter mutation, with optional defect injection.

    Unconditioned mode places the target composition on a jittered cubic
    grid sized from the largest covalent radius involved, which keeps every
    pair above the full-credit distance and the volume per atom inside the
    physical window (guaranteed for elements with radius <= 2.5 A).
    Conditioned mode jitters the exemplar's coordinates and cell lengths,
    with a per-candidate amplitude drawn in [0, 1) so some candidates move
    very little.

    Defect injection corrupts the output with per-class probabilities from
    `defect_rates`.  Each class draws from its own seed substream, so
    disabling one class leaves every other draw unchanged.  `propose` is a
    pure function of (exemplar, target, rng_seed).
    """

    defect_rates: DefectRates = field(default_factory=DefectRates)
    coord_jitter: float = 0.05  # fractional units, conditioned mode
    lattice_jitter: float = 0.02  # relative cell-length amplitude
    radii: Mapping[str, float] = field(default_factory=lambda: COVALENT_RADII)
    spacing_floor: float = 1.9  # angstroms
    spacing_cap: float = 4.2  # angstroms

    def propose(
        self,
        exemplar: Structure | None,
        target: CompositionVector,
        rng_seed: int,
    ) -> str:
        rng = np.random.default_rng([rng_seed, _STREAM_GEOMETRY])
        if exemplar is None:
            structure = self._build_from_target(target, rng)
        else:
            structure = self._mutate(exemplar, rng)
        injected = self.injected_defects(rng_seed, target)
        if "composition" in injected:
            structure = _corrupt_composition(structure)
        if "overlap" in injected and len(structure.sites) >= 2:
            structure = _corrupt_overlap(structure)
        text = serialize_cif(structure)
        if "missing_field" in injected:
            # both the symbol and the table-number tag must go, or the
            # space group would still count as informative
            text = "\n".join(
                ln
                for ln in text.splitlines()
                if not ln.lower().startswith(
                    ("_symmetry_space_group_name_h-m", "_symmetry_int_tables_number")
                )
            ) + "\n"
        if "syntax" in injected:
            text = "\n".join(
                ln for ln in text.splitlines() if not ln.startswith("data_")
            ) + "\n"
        return text

    def injected_defects(
        self, rng_seed: int, target: CompositionVector
    ) -> frozenset[str]:
        """Classes this seed will corrupt; mirrors `propose` exactly."""
        rates = self.defect_rates
        n_atoms = sum(target.values())
        out = set()
        draws = (
            ("syntax", rates.syntax, _STREAM_SYNTAX, 1),
            ("missing_field", rates.missing_field, _STREAM_MISSING_FIELD, 1),
            ("composition", rates.composition, _STREAM_COMPOSITION, 1),
            ("overlap", rates.overlap, _STREAM_OVERLAP, 2),
        )
        for name, rate, stream, min_atoms in draws:
            if rate <= 0.0 or n_atoms < min_atoms:
                continue
            if np.random.default_rng([rng_seed, stream]).random() < rate:
                out.add(name)
        return frozenset(out)

    def expected_failure_flags(
        self, rng_seed: int, target: CompositionVector
    ) -> frozenset[str]:
        """Reward failure flags the injected defects will cause.

        A syntax defect is fatal, so it masks every other flag (PF only).
        Otherwise: missing_field -> VF, composition -> CM, overlap -> PV.
        Assumes the candidate was otherwise clean, which unconditioned
        generation guarantees.
        """
        injected = self.injected_defects(rng_seed, target)
        if "syntax" in injected:
            return frozenset({"PF"})
        mapping = {"missing_field": "VF", "composition": "CM", "overlap": "PV"}
        return frozenset(mapping[c] for c in injected)

    # -- internals ---------------------------------------------------------

    def _build_from_target(
        self, target: CompositionVector, rng: np.random.Generator
    ) -> Structure:
        symbols = [el for el in sorted(target) for _ in range(target[el])]
        if not symbols:
            raise ValueError("target composition must contain at least one atom")
        n = len(symbols)
        r_max = max(self.radii[el] for el in symbols)
        spacing = min(max(2.2 * r_max, self.spacing_floor), self.spacing_cap)
        dims = _grid_dims(n)
        cells = dims[0] * dims[1] * dims[2]
        chosen = rng.choice(cells, size=n, replace=False)
        lattice = Lattice(
            a=dims[0] * spacing,
            b=dims[1] * spacing,
            c=dims[2] * spacing,
            alpha=90.0,
            beta=90.0,
            gamma=90.0,
        )
        sites = []
        counts: dict[str, int] = {}
        for el, cell in zip(symbols, chosen):
            idx = (
                cell // (dims[1] * dims[2]),
                (cell // dims[2]) % dims[1],
                cell % dims[2],
            )
            # jitter of at most 0.05 * spacing per cartesian axis keeps
            # distinct grid cells at least 0.9 * spacing apart
            frac = tuple(
                (idx[k] + 0.5 + rng.uniform(-0.05, 0.05)) / dims[k] for k in range(3)
            )
            counts[el] = counts.get(el, 0) + 1
            sites.append(
                _make_site(f"{el}{counts[el]}", el, frac)
            )
        return Structure(
            lattice=lattice,
            sites=tuple(sites),
            space_group_symbol="P 1",
            space_group_number=1,
        )

    def _mutate(self, exemplar: Structure, rng: np.random.Generator) -> Structure:
        amp = self.coord_jitter * rng.random()
        n = len(exemplar.sites)
        shifts = rng.uniform(-amp, amp, size=(n, 3))
        lat_amp = self.lattice_jitter * rng.random()
        factors = 1.0 + rng.uniform(-lat_amp, lat_amp, size=3)
        lat = exemplar.lattice
        lattice = Lattice(
            a=lat.a * factors[0],
            b=lat.b * factors[1],
            c=lat.c * factors[2],
            alpha=lat.alpha,
            beta=lat.beta,
            gamma=lat.gamma,
        )
        sites = tuple(
            _make_site(
                site.label,
                site.element,
                tuple(site.frac[k] + shifts[i, k] for k in range(3)),
                site,
            )
            for i, site in enumerate(exemplar.sites)
        )
        return Structure(
            lattice=lattice,
            sites=sites,
            space_group_symbol=exemplar.space_group_symbol,
            space_group_number=exemplar.space_group_number,
        )


def _make_site(
    label: str,
    element: str,
    frac: tuple[float, float, float],
    template: AtomSite | None = None,
) -> AtomSite:
    role = template.role_tag if template is not None else RoleTag.UNSPECIFIED
    return AtomSite(label=label, element=element, frac=frac, role_tag=role)


def _corrupt_composition(structure: Structure) -> Structure:
    """Swap the first site's element for a small noble-gas atom.

    The substitute's covalent radius is small enough that, at the grid
    spacings the unconditioned builder uses, the swap cannot push any pair
    below the distance-credit thresholds; only the composition changes.
    """
    present = {s.element for s in structure.sites}
    sub = next((el for el in ("He", "Ne", "Ar", "Kr") if el not in present), "He")
    first = structure.sites[0]
    labels = {s.label for s in structure.sites}
    label = f"{sub}1" if f"{sub}1" not in labels else f"{sub}sub1"
    swapped = _make_site(label, sub, first.frac, first)
    return Structure(
        lattice=structure.lattice,
        sites=(swapped,) + structure.sites[1:],
        space_group_symbol=structure.space_group_symbol,
        space_group_number=structure.space_group_number,
    )


def _corrupt_overlap(structure: Structure) -> Structure:
    """Move the second site onto the first: a guaranteed hard overlap."""
    first = structure.sites[0]
    second = structure.sites[1]
    moved = _make_site(second.label, second.element, first.frac, second)
    return Structure(
        lattice=structure.lattice,
        sites=(first, moved) + structure.sites[2:],
        space_group_symbol=structure.space_group_symbol,
        space_group_number=structure.space_group_number,
    )


# ---------------------------------------------------------------------------
# combined reward


@dataclass(frozen=True)
class CombinedBreakdown:
    """Energy and formatting components of one candidate's score."""

    score: float
    energy: float | None
    energy_reward: float
    pvcp: RewardBreakdown
    hard_pass: bool
    parsed: bool
    diagnostics: tuple[str, ...] = ()
    structure: Structure | None = None  # parsed candidate; not serialized

    def to_json_dict(self) -> dict:
        return {
            "score": self.score,
            "energy": self.energy,
            "energy_reward": self.energy_reward,
            "pvcp": self.pvcp.to_json_dict(),
            "hard_pass": self.hard_pass,
            "parsed": self.parsed,
            "diagnostics": list(self.diagnostics),
        }


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the closed loop; weights must sum to 1."""

    target_energy: float
    target_composition: Mapping[str, int] = field(default_factory=dict)
    seed: int = 0
    iterations: int = 10
    candidates_per_iteration: int = 16
    pool_capacity: int = 8
    init_candidates: int = 32
    init_rounds: int = 5
    lambda_energy: float = 1.0
    energy_weight: float = 0.7
    pvcp_weight: float = 0.3
    success_tolerance: float = 0.1

    def __post_init__(self) -> None:
        # accept numpy scalars without letting them leak into reports
        object.__setattr__(self, "target_energy", float(self.target_energy))
        if not math.isfinite(self.target_energy):
            raise ValueError("target_energy must be finite")
        for name in ("iterations", "candidates_per_iteration", "pool_capacity",
                     "init_candidates", "init_rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.energy_weight < 0.0 or self.pvcp_weight < 0.0:
            raise ValueError("reward weights must be non-negative")
        if abs(self.energy_weight + self.pvcp_weight - 1.0) > 1e-9:
            raise ValueError("energy_weight + pvcp_weight must equal 1")
        if not (math.isfinite(self.lambda_energy) and self.lambda_energy > 0.0):
            raise ValueError("lambda_energy must be positive")
        if not (math.isfinite(self.success_tolerance) and self.success_tolerance > 0.0):
            raise ValueError("success_tolerance must be positive")
        for el, cnt in self.target_composition.items():
            if int(cnt) < 0:
                raise ValueError(f"negative target count for {el!r}")

    def to_json_dict(self) -> dict:
        return {
            "target_energy": self.target_energy,
            "target_composition": dict(sorted(self.target_composition.items())),
            "seed": self.seed,
            "iterations": self.iterations,
            "candidates_per_iteration": self.candidates_per_iteration,
            "pool_capacity": self.pool_capacity,
            "init_candidates": self.init_candidates,
            "init_rounds": self.init_rounds,
            "lambda_energy": self.lambda_energy,
            "energy_weight": self.energy_weight,
            "pvcp_weight": self.pvcp_weight,
            "success_tolerance": self.success_tolerance,
        }


def combined_reward(
    candidate_text: str,
    predictor: EnergyPredictor,
    cfg: SearchConfig,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    phys: PhysConfig = DEFAULT_PHYS,
    radii: Mapping[str, float] = COVALENT_RADII,
) -> tuple[float, CombinedBreakdown]:
    """Score candidate text against the target energy and composition.

    Parse failures score 0.  A predictor that raises on a parsed structure
    also scores the candidate 0, with the exception recorded as a
    diagnostic rather than propagated.
    """
    outcome = parse_cif(candidate_text)
    breakdown = pvcp_from_outcome(
        outcome, cfg.target_composition, weights, phys, radii
    )
    diagnostics: list[str] = []
    if not outcome.ok:
        combined = CombinedBreakdown(
            score=0.0,
            energy=None,
            energy_reward=0.0,
            pvcp=breakdown,
            hard_pass=False,
            parsed=False,
            diagnostics=("parse failure",),
        )
        return 0.0, combined
    structure = outcome.structure
    assert structure is not None
    hard_pass = passes_hard_constraints(structure, radii, phys)
    try:
        energy = float(predictor.predict(structure))
        if not math.isfinite(energy):
            raise ValueError(f"predictor returned non-finite energy {energy!r}")
    except Exception as exc:  # predictor contract: failures score zero
        diagnostics.append(f"predictor failed: {exc}")
        combined = CombinedBreakdown(
            score=0.0,
            energy=None,
            energy_reward=0.0,
            pvcp=breakdown,
            hard_pass=hard_pass,
            parsed=True,
            diagnostics=tuple(diagnostics),
            structure=structure,
        )
        return 0.0, combined
    e_rew = energy_reward(energy, cfg.target_energy, cfg.lambda_energy)
    score = cfg.energy_weight * e_rew + cfg.pvcp_weight * breakdown.total
    combined = CombinedBreakdown(
        score=score,
        energy=energy,
        energy_reward=e_rew,
        pvcp=breakdown,
        hard_pass=hard_pass,
        parsed=True,
        diagnostics=tuple(diagnostics),
        structure=structure,
    )
    return score, combined


# ---------------------------------------------------------------------------
# exemplar pool


@dataclass(frozen=True)
class PoolEntry:
    """One retained exemplar with its frozen score and provenance."""

    structure: Structure
    cif_text: str
    score: float
    energy: float
    pvcp_total: float
    iteration: int  # 0 = initialization


class PoolInitializationError(RuntimeError):
    """Raised when too few hard-constraint-passing candidates were found."""


class ExemplarPool:
    """Fixed-capacity pool ordered by descending score; ties by insertion."""

    def __init__(self, entries: list[PoolEntry], capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if len(entries) != capacity:
            raise ValueError(
                f"pool needs exactly {capacity} entries, got {len(entries)}"
            )
        self.capacity = capacity
        self._entries = sorted(entries, key=lambda e: -e.score)

    @property
    def entries(self) -> tuple[PoolEntry, ...]:
        return tuple(self._entries)

    @property
    def min_score(self) -> float:
        return self._entries[-1].score

    @property
    def max_score(self) -> float:
        return self._entries[0].score

    @property
    def best(self) -> PoolEntry:
        return self._entries[0]

    def __len__(self) -> int:
        return len(self._entries)

    def sample(self, rng: np.random.Generator) -> PoolEntry:
        """Uniformly sampled exemplar."""
        return self._entries[int(rng.integers(len(self._entries)))]

    def try_replace(self, entry: PoolEntry) -> bool:
        """Admit `entry` iff it strictly beats the current minimum.

        The minimum member is evicted, so the pool size stays fixed and the
        pool minimum never decreases.
        """
        if entry.score <= self.min_score:
            return False
        self._entries.pop()
        bisect.insort_right(self._entries, entry, key=lambda e: -e.score)
        return True

    def scores(self) -> list[float]:
        return [e.score for e in self._entries]


# ---------------------------------------------------------------------------
# the loop


@dataclass(frozen=True)
class IterationLog:
    """What one refinement iteration did."""

    iteration: int
    exemplar_score: float
    exemplar_iteration: int
    candidate_scores: tuple[float, ...]
    admitted: int
    best_abs_delta: float | None  # this iteration, hard-passing candidates only
    pool_min: float
    pool_max: float

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "exemplar_score": self.exemplar_score,
            "exemplar_iteration": self.exemplar_iteration,
            "candidate_scores": list(self.candidate_scores),
            "admitted": self.admitted,
            "best_abs_delta": self.best_abs_delta,
            "pool_min": self.pool_min,
            "pool_max": self.pool_max,
        }


@dataclass(frozen=True)
class SearchReport:
    """Full account of one closed-loop run."""

    config: SearchConfig
    init_generated: int
    init_passed: int
    init_rounds: int
    iterations: tuple[IterationLog, ...]
    best_abs_delta: float | None
    success: bool
    final_pool_scores: tuple[float, ...]
    best_cif: str
    best_energy: float

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "init": {
                "generated": self.init_generated,
                "passed": self.init_passed,
                "rounds": self.init_rounds,
            },
            "iterations": [log.to_json_dict() for log in self.iterations],
            "best_abs_delta": self.best_abs_delta,
            "success": self.success,
            "final_pool_scores": list(self.final_pool_scores),
            "best_cif": self.best_cif,
            "best_energy": self.best_energy,
        }


def _evaluate(
    text: str,
    predictor: EnergyPredictor,
    cfg: SearchConfig,
    weights: RewardWeights,
    phys: PhysConfig,
    radii: Mapping[str, float],
    iteration: int,
) -> tuple[CombinedBreakdown, PoolEntry | None]:
    score, br = combined_reward(text, predictor, cfg, weights, phys, radii)
    if not (br.parsed and br.hard_pass and br.energy is not None):
        return br, None
    assert br.structure is not None
    entry = PoolEntry(
        structure=br.structure,
        cif_text=text,
        score=score,
        energy=br.energy,
        pvcp_total=br.pvcp.total,
        iteration=iteration,
    )
    return br, entry


def initialize_pool(
    generator: CandidateGenerator,
    predictor: EnergyPredictor,
    cfg: SearchConfig,
    rng: np.random.Generator,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    phys: PhysConfig = DEFAULT_PHYS,
    radii: Mapping[str, float] = COVALENT_RADII,
) -> tuple[ExemplarPool, dict]:
    """Fill the pool with the best hard-passing unconditioned candidates.

    Generates `cfg.init_candidates` candidates per round, up to
    `cfg.init_rounds` rounds, until at least `cfg.pool_capacity` candidates
    pass parsing and the hard constraints; raises `PoolInitializationError`
    otherwise.  Returns the pool plus bookkeeping stats.
    """
    passing: list[PoolEntry] = []
    generated = 0
    rounds = 0
    best_delta: float | None = None
    while len(passing) < cfg.pool_capacity and rounds < cfg.init_rounds:
        rounds += 1
        for _ in range(cfg.init_candidates):
            seed = int(rng.integers(2**32))
            text = generator.propose(None, cfg.target_composition, seed)
            generated += 1
            _, entry = _evaluate(
                text, predictor, cfg, weights, phys, radii, iteration=0
            )
            if entry is not None:
                passing.append(entry)
                delta = abs(entry.energy - cfg.target_energy)
                if best_delta is None or delta < best_delta:
                    best_delta = delta
    if len(passing) < cfg.pool_capacity:
        raise PoolInitializationError(
            f"only {len(passing)} of {cfg.pool_capacity} required candidates "
            f"passed hard constraints after {generated} attempts"
        )
    ranked = sorted(
        range(len(passing)), key=lambda k: (-passing[k].score, k)
    )[: cfg.pool_capacity]
    pool = ExemplarPool([passing[k] for k in ranked], cfg.pool_capacity)
    stats = {
        "generated": generated,
        "passed": len(passing),
        "rounds": rounds,
        "best_abs_delta": best_delta,
    }
    return pool, stats


def refine_step(
    pool: ExemplarPool,
    generator: CandidateGenerator,
    predictor: EnergyPredictor,
    cfg: SearchConfig,
    rng: np.random.Generator,
    iteration: int,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    phys: PhysConfig = DEFAULT_PHYS,
    radii: Mapping[str, float] = COVALENT_RADII,
) -> IterationLog:
    """One refinement iteration; mutates the pool in place.

    Samples an exemplar uniformly, scores `cfg.candidates_per_iteration`
    conditioned candidates, and admits them sequentially under the
    strict-improvement rule.
    """
    exemplar = pool.sample(rng)
    scores: list[float] = []
    admitted = 0
    best_delta: float | None = None
    for _ in range(cfg.candidates_per_iteration):
        seed = int(rng.integers(2**32))
        text = generator.propose(exemplar.structure, cfg.target_composition, seed)
        br, entry = _evaluate(
            text, predictor, cfg, weights, phys, radii, iteration=iteration
        )
        scores.append(br.score)
        if entry is None:
            continue
        delta = abs(entry.energy - cfg.target_energy)
        if best_delta is None or delta < best_delta:
            best_delta = delta
        if pool.try_replace(entry):
            admitted += 1
    return IterationLog(
        iteration=iteration,
        exemplar_score=exemplar.score,
        exemplar_iteration=exemplar.iteration,
        candidate_scores=tuple(scores),
        admitted=admitted,
        best_abs_delta=best_delta,
        pool_min=pool.min_score,
        pool_max=pool.max_score,
    )


def run_search(
    generator: CandidateGenerator,
    predictor: EnergyPredictor,
    cfg: SearchConfig,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    phys: PhysConfig = DEFAULT_PHYS,
    radii: Mapping[str, float] = COVALENT_RADII,
) -> SearchReport:
    """Run initialization plus `cfg.iterations` refinement iterations.

    Fully deterministic for a fixed config and deterministic generator and
    predictor.  Success means some hard-passing candidate (from any phase)
    predicted within `cfg.success_tolerance` eV of the target energy.
    """
    rng = np.random.default_rng(cfg.seed)
    pool, stats = initialize_pool(generator, predictor, cfg, rng, weights, phys, radii)
    best_delta = stats["best_abs_delta"]
    logs: list[IterationLog] = []
    for it in range(1, cfg.iterations + 1):
        log = refine_step(
            pool, generator, predictor, cfg, rng, it, weights, phys, radii
        )
        logs.append(log)
        if log.best_abs_delta is not None and (
            best_delta is None or log.best_abs_delta < best_delta
        ):
            best_delta = log.best_abs_delta
    success = bool(best_delta is not None and best_delta <= cfg.success_tolerance)
    return SearchReport(
        config=cfg,
        init_generated=stats["generated"],
        init_passed=stats["passed"],
        init_rounds=stats["rounds"],
        iterations=tuple(logs),
        best_abs_delta=best_delta,
        success=success,
        final_pool_scores=tuple(pool.scores()),
        best_cif=pool.best.cif_text,
        best_energy=pool.best.energy,
    )
