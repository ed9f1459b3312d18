"""Scoring, policy math, and closed-loop search for generated crystal text.

The package covers the non-neural half of a generate-and-score workflow for
catalytic materials: a defect-reporting CIF reader/writer, periodic-geometry
helpers, a multi-term parse/validity/composition/physics reward, group-wise
advantage and loss math for policy optimization, a max-min gated two-task
loss, structure-to-text conversion for adsorption systems, and an
exemplar-pool search loop with pluggable generator and predictor contracts.
"""

__version__ = "0.1.0"

from .cif import (
    AtomSite,
    CifDocument,
    Defect,
    DefectCode,
    FATAL_DEFECTS,
    Lattice,
    ParseOutcome,
    RoleTag,
    Structure,
    composition_of,
    parse_cif,
    serialize_cif,
    structures_close,
)
from .elements import ATOMIC_NUMBERS, COVALENT_RADII, SYMBOLS
from .geometry import (
    DegenerateCellError,
    NeighborEntry,
    NeighborList,
    build_neighbor_list,
    min_image_distance,
    min_pair_distance,
    volume_per_atom,
)
from .policy import (
    CandidateGroup,
    GroupMember,
    GrpoConfig,
    MmtgConfig,
    SequenceLogProbs,
    group_advantages,
    group_from_json_dict,
    group_from_json_line,
    group_report,
    grpo_loss,
    kl_estimate,
    mmtg_loss,
    normalized_logprob,
)
from .reward import (
    DEFAULT_PHYS,
    DEFAULT_WEIGHTS,
    FailureMode,
    PhysConfig,
    RewardBreakdown,
    RewardWeights,
    corpus_failure_rates,
    pvcp,
    score_composition,
    score_parse,
    score_physical,
    score_valid,
)
from .search import (
    CombinedBreakdown,
    DefectRates,
    ExemplarPool,
    MutationGenerator,
    PairPotentialSurrogate,
    PoolEntry,
    SearchConfig,
    SearchReport,
    combined_reward,
    energy_reward,
    initialize_pool,
    refine_step,
    run_search,
)
from .textify import (
    SystemMetadata,
    SystemText,
    find_interaction_atoms,
    reduced_formula,
    to_system_text,
)

__all__ = [
    "ATOMIC_NUMBERS",
    "AtomSite",
    "COVALENT_RADII",
    "CandidateGroup",
    "CifDocument",
    "CombinedBreakdown",
    "DEFAULT_PHYS",
    "DEFAULT_WEIGHTS",
    "Defect",
    "DefectCode",
    "DefectRates",
    "DegenerateCellError",
    "ExemplarPool",
    "FATAL_DEFECTS",
    "FailureMode",
    "GroupMember",
    "GrpoConfig",
    "Lattice",
    "MmtgConfig",
    "MutationGenerator",
    "NeighborEntry",
    "NeighborList",
    "PairPotentialSurrogate",
    "ParseOutcome",
    "PhysConfig",
    "PoolEntry",
    "RewardBreakdown",
    "RewardWeights",
    "RoleTag",
    "SYMBOLS",
    "SearchConfig",
    "SearchReport",
    "SequenceLogProbs",
    "Structure",
    "SystemMetadata",
    "SystemText",
    "build_neighbor_list",
    "combined_reward",
    "composition_of",
    "corpus_failure_rates",
    "energy_reward",
    "find_interaction_atoms",
    "group_advantages",
    "group_from_json_dict",
    "group_from_json_line",
    "group_report",
    "grpo_loss",
    "initialize_pool",
    "kl_estimate",
    "min_image_distance",
    "min_pair_distance",
    "mmtg_loss",
    "normalized_logprob",
    "parse_cif",
    "pvcp",
    "reduced_formula",
    "refine_step",
    "run_search",
    "score_composition",
    "score_parse",
    "score_physical",
    "score_valid",
    "serialize_cif",
    "structures_close",
    "to_system_text",
    "volume_per_atom",
]
