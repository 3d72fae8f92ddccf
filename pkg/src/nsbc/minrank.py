"""Triangle number and min-rank of connectivity patterns.

The triangle number is a purely combinatorial lower bound; the min-rank over
GF(q) is the smallest rank of a matrix whose zero cells are exactly the zeros
of the pattern.  Together they sandwich the non-signaling sum-capacity in
units of ``log2 q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from .field import GF, batch_rank, parse_field, rank
from .topology import ConnectivityPattern

DEFAULT_BUDGET = 2 * 10**8

# cap on int64 cells held in one vectorised chunk
_CHUNK_CELLS = 2**22


class BudgetExceeded(RuntimeError):
    """Work budget ran out.  ``best`` carries whatever partial answer exists."""

    def __init__(self, message: str, best=None, work: int = 0):
        super().__init__(message)
        self.best = best
        self.work = work


# -- triangle number -----------------------------------------------------------


def find_triangle(pattern: ConnectivityPattern, max_nodes: int | None = None) -> list[tuple[int, int]]:
    """A longest sequence of (row, col) stars forming a triangular submatrix.

    The pairs come in triangle order: ``M[i_a, j_a]`` is a star and
    ``M[i_a, j_b]`` is zero whenever ``b > a``.  Once (i, j) is picked the
    remaining columns must be zeros of row i, so the search state is just
    the set of usable columns.
    """
    S = pattern.stars
    K, B = S.shape
    zero_mask = [sum(1 << j for j in range(B) if not S[i, j]) for i in range(K)]
    star_rows = [[i for i in range(K) if S[i, j]] for j in range(B)]
    nodes = 0

    @lru_cache(maxsize=None)
    def best(cols: int) -> tuple[tuple[int, int], ...]:
        nonlocal nodes
        nodes += 1
        if max_nodes is not None and nodes > max_nodes:
            raise BudgetExceeded("triangle search exceeded its node budget")
        out: tuple[tuple[int, int], ...] = ()
        bound = bin(cols).count("1")
        seen = set()
        for j in range(B):
            if not cols >> j & 1:
                continue
            for i in star_rows[j]:
                rest = cols & ~(1 << j) & zero_mask[i]
                if rest in seen:
                    continue
                seen.add(rest)
                if 1 + bin(rest).count("1") <= len(out):
                    continue
                cand = ((i, j),) + best(rest)
                if len(cand) > len(out):
                    out = cand
                    if len(out) == bound:
                        return out
        return out

    try:
        return list(best((1 << B) - 1))
    except BudgetExceeded as exc:
        exc.best = len(_greedy_triangle(S))
        raise


def _greedy_triangle(S: np.ndarray) -> list[tuple[int, int]]:
    K, B = S.shape
    cols, out = set(range(B)), []
    while True:
        options = [(i, j) for j in sorted(cols) for i in range(K) if S[i, j]]
        if not options:
            return out
        i, j = max(options, key=lambda ij: sum(not S[ij[0], c] for c in cols))
        out.append((i, j))
        cols = {c for c in cols if c != j and not S[i, c]}


def triangle_number(pattern: ConnectivityPattern, max_nodes: int | None = None) -> int:
    return len(find_triangle(pattern, max_nodes))


# -- min-rank ------------------------------------------------------------------


@dataclass
class MinrankResult:
    rank: int
    witness: np.ndarray
    work: int


def fits(pattern: ConnectivityPattern, G) -> bool:
    G = np.asarray(G)
    return G.shape == pattern.stars.shape and np.array_equal(G != 0, pattern.stars)


def _spanning_forest(P: np.ndarray) -> set[tuple[int, int]]:
    """Stars of ``P`` forming a spanning forest of its row/column star graph."""
    r, B = P.shape
    parent = list(range(r + B))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    forest = set()
    for t in range(r):
        for j in range(B):
            if P[t, j]:
                a, b = find(t), find(r + j)
                if a != b:
                    parent[a] = b
                    forest.add((t, j))
    return forest


def _coefficient_vectors(field: GF, r: int) -> np.ndarray:
    vecs = np.array(list(product(range(field.q), repeat=r)), dtype=np.int64)
    return vecs[1:]  # drop the zero vector


def _nonzero_assignments(field: GF, n: int, start: int, stop: int) -> np.ndarray:
    """Rows ``start..stop`` of the (q-1)^n table of nonzero tuples, last digit fastest."""
    base = field.q - 1
    idx = np.arange(start, stop, dtype=np.int64)
    out = np.empty((stop - start, n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[:, t] = idx % base + 1
        idx //= base
    return out


def minrank_search(pattern: ConnectivityPattern, field: GF | str,
                   budget: float = DEFAULT_BUDGET) -> MinrankResult:
    """Exact min-rank by row-basis search, with a fitting witness of that rank.

    For each candidate rank r (starting at the triangle number) and each
    r-subset of rows taken as a basis, the basis rows' star values are
    enumerated and every other row must be a combination of them with
    exactly the required zero pattern.  Row and column scalings preserve
    both fit and rank, so the stars on a spanning forest of the basis rows
    are pinned to 1.
    """
    F = parse_field(field)
    S = pattern.stars
    K, B = S.shape
    budget = int(budget)
    work = 0
    hi = min(K, B)
    lo = max(1, triangle_number(pattern))

    for r in range(lo, hi):
        coeffs = _coefficient_vectors(F, r)
        n_coeff = len(coeffs)
        for basis in combinations(range(K), r):
            P = S[list(basis)]
            touched = P.any(axis=0)
            others = [i for i in range(K) if i not in basis]
            if any((S[i] & ~touched).any() for i in others):
                continue
            forest = _spanning_forest(P)
            free = [(t, j) for t in range(r) for j in range(B) if P[t, j] and (t, j) not in forest]
            total = (F.q - 1) ** len(free)
            chunk = max(1, _CHUNK_CELLS // (n_coeff * B))
            base = np.zeros((r, B), dtype=np.int64)
            for t, j in forest:
                base[t, j] = 1
            ft = np.array([t for t, _ in free], dtype=np.int64)
            fj = np.array([j for _, j in free], dtype=np.int64)
            for start in range(0, total, chunk):
                stop = min(total, start + chunk)
                n = stop - start
                work += n * (n_coeff * (len(others) + 1) + r * B)
                if work > budget:
                    raise BudgetExceeded(
                        f"min-rank search over {F} ran out of budget while testing rank {r}",
                        best=None, work=work)
                mats = np.broadcast_to(base, (n, r, B)).copy()
                if free:
                    mats[:, ft, fj] = _nonzero_assignments(F, len(free), start, stop)
                ok = batch_rank(F, mats) == r
                if not ok.any():
                    continue
                mats = mats[ok]
                # every nonzero combination of the basis rows: (n, n_coeff, B)
                combos = np.zeros((len(mats), n_coeff, B), dtype=np.int64)
                for t in range(r):
                    combos = F.add(combos, F.mul(coeffs[None, :, t, None], mats[:, None, t, :]))
                nonzero = combos != 0
                feasible = np.ones(len(mats), dtype=bool)
                choice = {}
                for i in others:
                    match = (nonzero == S[i][None, None, :]).all(axis=2)
                    feasible &= match.any(axis=1)
                    choice[i] = match.argmax(axis=1)
                    if not feasible.any():
                        break
                if feasible.any():
                    m = int(np.argmax(feasible))
                    G = np.zeros((K, B), dtype=np.int64)
                    for t, i in enumerate(basis):
                        G[i] = mats[m, t]
                    for i in others:
                        G[i] = combos[m, choice[i][m]]
                    return MinrankResult(r, G, work)
    # every fitting matrix has rank <= min(K, B), and lower ranks were refuted
    return MinrankResult(hi, S.astype(np.int64), work)


def minrank_exact(pattern: ConnectivityPattern, field: GF | str,
                  budget: float = DEFAULT_BUDGET) -> int:
    return minrank_search(pattern, field, budget).rank


def minrank_bruteforce(pattern: ConnectivityPattern, field: GF | str,
                       normalize_columns: bool = False,
                       max_matrices: int = 2**26) -> int:
    """Minimum rank over an exhaustive enumeration of fitting matrices.

    With ``normalize_columns`` the first star of every column is fixed to 1,
    which loses nothing because column scaling keeps rank and fit.
    """
    F = parse_field(field)
    S = pattern.stars
    K, B = S.shape
    cells = [tuple(c) for c in np.argwhere(S)]
    fixed = set()
    if normalize_columns:
        for j in range(B):
            fixed.add((int(np.flatnonzero(S[:, j])[0]), j))
    free = [c for c in cells if c not in fixed]
    total = (F.q - 1) ** len(free)
    if total > max_matrices:
        raise BudgetExceeded(f"{total} fitting matrices exceed the enumeration cap")
    base = S.astype(np.int64)
    fi = np.array([c[0] for c in free], dtype=np.int64)
    fj = np.array([c[1] for c in free], dtype=np.int64)
    chunk = max(1, _CHUNK_CELLS // (K * B))
    best = min(K, B)
    for start in range(0, total, chunk):
        stop = min(total, start + chunk)
        mats = np.broadcast_to(base, (stop - start, K, B)).copy()
        if free:
            mats[:, fi, fj] = _nonzero_assignments(F, len(free), start, stop)
        best = min(best, int(batch_rank(F, mats).min()))
    return best


def nonzeros_upper_bound(pattern: ConnectivityPattern) -> int:
    """Star-count bound on the min-rank.

    If every column has at least r stars the min-rank is at most K + 1 - r;
    with at least r stars in every row it is at most B + 1 - r.
    """
    S = pattern.stars
    K, B = S.shape
    col_r = int(S.sum(axis=0).min())
    row_r = int(S.sum(axis=1).min())
    return min(K + 1 - col_r, B + 1 - row_r)


@dataclass
class NsSumBounds:
    lower_bits: float
    upper_bits: float
    tight: bool
    tri: int
    minrank: int | None
    budget_exceeded: bool = False

    def as_tuple(self) -> tuple[float, float, bool]:
        return self.lower_bits, self.upper_bits, self.tight


def ns_sum_bounds(pattern: ConnectivityPattern, field: GF | str,
                  budget: float = DEFAULT_BUDGET) -> NsSumBounds:
    """NS sum-capacity bounds in bits per channel use: tri and min-rank times log2 q."""
    F = parse_field(field)
    tri = triangle_number(pattern)
    bits = math.log2(F.q)
    small = min(pattern.K, pattern.B) <= 6
    try:
        mr = minrank_exact(pattern, F, budget)
    except BudgetExceeded:
        upper = min(nonzeros_upper_bound(pattern), pattern.K, pattern.B)
        return NsSumBounds(tri * bits, upper * bits, small or upper == tri, tri, None, True)
    return NsSumBounds(tri * bits, mr * bits, mr == tri, tri, mr)


@dataclass
class PatternRankReport:
    tri: int
    minrank_by_field: dict[str, int | str] = field(default_factory=dict)
    nonzeros_bound: int = 0
    min_dim: int = 0

    @property
    def equality_guaranteed(self) -> bool:
        return self.min_dim <= 6

    def bounds(self, field_name: str) -> tuple[int, int | str]:
        return self.tri, self.minrank_by_field[field_name]

    def to_json(self) -> dict:
        return {"tri": self.tri, "minrank_by_field": dict(self.minrank_by_field),
                "nonzeros_upper_bound": self.nonzeros_bound,
                "equality_guaranteed": self.equality_guaranteed}


def rank_report(pattern: ConnectivityPattern, fields, budget: float = DEFAULT_BUDGET) -> PatternRankReport:
    rep = PatternRankReport(triangle_number(pattern), {}, nonzeros_upper_bound(pattern),
                            min(pattern.K, pattern.B))
    for f in fields:
        F = parse_field(f)
        try:
            rep.minrank_by_field[F.name] = minrank_exact(pattern, F, budget)
        except BudgetExceeded:
            rep.minrank_by_field[F.name] = "budget-exceeded"
    return rep


def random_pattern(rng: np.random.Generator, K: int, B: int, density: float = 0.5) -> ConnectivityPattern:
    """Random valid pattern: resamples until no row or column is empty."""
    while True:
        S = rng.random((K, B)) < density
        if S.any(axis=0).all() and S.any(axis=1).all():
            return ConnectivityPattern(S)


FANO = ConnectivityPattern.from_rows([
    "*000***",
    "0*0*0**",
    "00***0*",
    "0**0**0",
    "*0**0*0",
    "**0**00",
    "***000*",
])


def fitting_rank(pattern: ConnectivityPattern, field: GF | str, G) -> int:
    """Rank of ``G`` after checking that it fits the pattern."""
    F = parse_field(field)
    if not fits(pattern, G):
        raise ValueError("matrix does not fit the pattern")
    return rank(F, G)
