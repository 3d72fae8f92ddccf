"""Min-rank of the Fano pattern depends on the field.

The 7 x 7 Fano pattern has a triangle of size 3 but no bigger one.  Over
fields of characteristic 2 a fitting matrix of rank 3 exists; over the
other small fields the best is 4.
"""
from __future__ import annotations

import time

from nsbc.field import field_of_order, rank
from nsbc.minrank import FANO, find_triangle, minrank_search, ns_sum_bounds

print("\n".join(FANO.rows()))
print("triangle:", find_triangle(FANO))

for q in (2, 3, 4, 5, 7, 8, 9):
    t0 = time.perf_counter()
    res = minrank_search(FANO, f"GF({q})")
    dt = time.perf_counter() - t0
    # the witness is a real fitting matrix; re-check its rank independently
    assert rank(field_of_order(q), res.witness) == res.rank
    print(f"GF({q}): min-rank {res.rank}   ({dt:.2f}s)")

print()
print("witness over GF(4):")
print(minrank_search(FANO, "GF(4)").witness)

# bits per channel use: lower bound from the triangle, upper from min-rank
b = ns_sum_bounds(FANO, "GF(3)")
print(f"\nGF(3) sum-capacity bounds: {b.lower_bits:.3f} .. {b.upper_bits:.3f} bits, tight={b.tight}")
