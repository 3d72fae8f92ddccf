"""Error rates only depend on each receiver's own channel row.

A channel G and the coupled copy Gbar*diag(lambda) have the same row laws
but different joint laws.  Any broadcast scheme errs equally often on both.
"""
from __future__ import annotations

from nsbc.harness import ExperimentConfig, compare_same_marginals

cfg = ExperimentConfig("naive-blind", {"network": "full", "K": 2}, "GF(3)", trials=50000, seed=3)
rec = compare_same_marginals(cfg, "mc")
print("original", rec.error_original)
print("coupled ", rec.error_coupled)
print("3 sigma ", [3 * s for s in rec.sigma], "within band:", rec.within_band)

exact = compare_same_marginals(ExperimentConfig("naive-blind", {"network": "path", "K": 2},
                                                "GF(3)"), "exhaustive")
print("exact error probabilities", [str(p) for p in exact.error_original],
      "difference", [str(d) for d in exact.difference])
