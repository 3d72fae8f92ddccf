"""Zero-error broadcast with non-signaling boxes, and what happens without them."""
from __future__ import annotations

import numpy as np

from nsbc.channel import ChannelDraw
from nsbc.field import field_of_order
from nsbc.harness import ExperimentConfig, run_experiment
from nsbc.schemes import naive_uncoded, ns_multipartite, ns_successive
from nsbc.topology import lower_triangular

F = field_of_order(3)
rng = np.random.default_rng(1)

# Two users over GF(3).  Rx-2 hears both antennas with G_21 = 2.
draw = ChannelDraw([[1, 0], [2, 1]], F)
run = ns_successive(lower_triangular(2), F, W=[1, 2], rng=rng, draw=draw)
print("sent", run.messages, "decoded", run.decoded)

run = naive_uncoded(lower_triangular(2), F, W=[1, 2], draw=draw)
print("naive decoded", run.decoded, "errors", run.per_user_error.tolist())

# Many seeded trials on the 4-user path: the NS schemes never err.
for scheme in ("ns-successive", "ns-multipartite", "naive"):
    rec = run_experiment(ExperimentConfig(scheme, {"network": "path", "K": 4}, "GF(5)",
                                          trials=2000, seed=7))
    print(f"{scheme:16s} errors per user {rec.error_counts}  rate {rec.rate_bits[0]:.3f} bits")

# one (K+1)-party box instead of K-1 two-party boxes gives the same result
W = [2, 0, 1, 1]
print(ns_multipartite(lower_triangular(4), F, W=W, rng=rng).decoded == W)
