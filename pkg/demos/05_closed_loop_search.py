"""
Closed-loop exemplar search with the desk-scale surrogates
==========================================================

The loop needs two pluggable parts: a generator that writes candidate CIF
text and a predictor that estimates an energy for a parsed structure.
Here both are the built-in surrogates, and the target energy is taken
from a known structure so the loop has something it can actually reach.
"""

from catloop import (
    MutationGenerator,
    PairPotentialSurrogate,
    SearchConfig,
    parse_cif,
    run_search,
)

generator = MutationGenerator()
predictor = PairPotentialSurrogate()
target_composition = {"Cu": 4, "O": 2}

# pick a reachable target: the surrogate energy of one known-good candidate
probe = parse_cif(generator.propose(None, target_composition, 999)).structure
target_energy = float(predictor.predict(probe))
print(f"target composition: {target_composition}")
print(f"target energy:      {target_energy:.4f} eV\n")

cfg = SearchConfig(
    target_energy=target_energy,
    target_composition=target_composition,
    seed=0,
    iterations=10,
    candidates_per_iteration=16,
    pool_capacity=8,
    success_tolerance=0.1,
)
report = run_search(generator, predictor, cfg)

print(
    f"init: {report.init_passed}/{report.init_generated} candidates "
    f"passed hard constraints in {report.init_rounds} round(s)"
)
print("\niteration trace (pool minimum can only go up):")
for log in report.iterations:
    delta = "-" if log.best_abs_delta is None else f"{log.best_abs_delta:.4f}"
    print(
        f"  it {log.iteration:2d}  pool=[{log.pool_min:.4f}, {log.pool_max:.4f}]"
        f"  admitted={log.admitted:2d}  best|dE|={delta}"
    )

print(f"\nsuccess: {report.success}  (best |dE| = {report.best_abs_delta:.4f} eV,"
      f" tolerance {cfg.success_tolerance} eV)")
print(f"best exemplar energy: {report.best_energy:.4f} eV")
print("\nbest exemplar CIF:")
print(report.best_cif)
