"""Tree networks: reconstructing the tree, its DoF region and a TDMA schedule."""
from __future__ import annotations

import numpy as np

from nsbc.schemes import classical_tdma
from nsbc.topology import (ConnectivityPattern, TreeNetwork, leaf_saturating_dof, sum_dof,
                           tdma_schedule, tree_from_pattern)

rows = ["*0*00", "*0*00", "***00", "00*00", "00*00", "00**0", "00***"]
tree = tree_from_pattern(ConnectivityPattern.from_rows(rows))
print("parents", tree.parent)
print("receiver -> antenna", tree.rx_assoc)
print("leaves", tree.leaves(), "  sum DoF classical/NS", sum_dof(tree))

# six antennas, one receiver each
fig = TreeNetwork.from_parents([0, 1, 2, 2, 1, 5], [1, 2, 3, 4, 5, 6])
d = [0.1, 0.2, 0.15, 0.25, 0.3, 0.05]
s = tdma_schedule(fig, d)
for k, (a, b) in sorted(s.receiver.items()):
    print(f"Rx-{k + 1}: [{a:.2f}, {b:.2f})")
print("orthogonal:", s.is_orthogonal())

# leaf-saturating DoF: the sum rate approaches (#leaves) log2 q as n grows
d = leaf_saturating_dof(fig)
for n in (1, 4, 16, 64):
    run = classical_tdma(fig, d, "GF(4)", n, rng=np.random.default_rng(n))
    print(f"n={n:3d} sum rate {run.sum_rate:.3f} bits, errors {int(run.per_user_error.sum())}")
