"""Connectivity patterns, tree networks and their DoF regions.

Antennas are labelled ``1..B``; label ``0`` is the imaginary root that every
top-level antenna hangs from.  Receivers are indexed ``0..K-1`` in arrays and
DoF vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TOL = 1e-12


class PatternError(ValueError):
    pass


class NotATreeError(ValueError):
    """Raised when a pattern is not induced by any tree network.

    ``witness`` is a dict naming the violated property and the receivers and
    antennas involved.
    """

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


class InfeasibleDofError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConnectivityPattern:
    """A K x B star/zero matrix; ``stars[k, b]`` is True when Rx-k hears Tx-b."""

    stars: np.ndarray

    def __post_init__(self):
        s = np.array(self.stars, dtype=bool)
        if s.ndim != 2 or 0 in s.shape:
            raise PatternError("pattern must be a non-empty 2-D matrix")
        empty_rows = np.flatnonzero(~s.any(axis=1))
        if empty_rows.size:
            raise PatternError(f"receiver row {int(empty_rows[0])} has no star")
        empty_cols = np.flatnonzero(~s.any(axis=0))
        if empty_cols.size:
            raise PatternError(f"antenna column {int(empty_cols[0])} has no star")
        s.setflags(write=False)
        object.__setattr__(self, "stars", s)

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "ConnectivityPattern":
        rows = [r.replace(" ", "") for r in rows]
        bad = {c for r in rows for c in r} - {"*", "0"}
        if bad:
            raise PatternError(f"unexpected symbols {sorted(bad)} in pattern rows")
        if len({len(r) for r in rows}) > 1:
            raise PatternError("pattern rows have different lengths")
        return cls(np.array([[c == "*" for c in r] for r in rows], dtype=bool))

    @classmethod
    def from_json(cls, data: dict | str) -> "ConnectivityPattern":
        if isinstance(data, str):
            data = json.loads(data)
        pat = cls.from_rows(data["rows"])
        if "K" in data and data["K"] != pat.K or "B" in data and data["B"] != pat.B:
            raise PatternError("declared K/B do not match the rows")
        return pat

    def to_json(self) -> dict:
        return {"K": self.K, "B": self.B, "rows": self.rows()}

    def rows(self) -> list[str]:
        return ["".join("*" if v else "0" for v in row) for row in self.stars]

    @property
    def K(self) -> int:
        return self.stars.shape[0]

    @property
    def B(self) -> int:
        return self.stars.shape[1]

    @property
    def n_stars(self) -> int:
        return int(self.stars.sum())

    def transpose(self) -> "ConnectivityPattern":
        return ConnectivityPattern(self.stars.T)

    def permute(self, row_perm, col_perm) -> "ConnectivityPattern":
        return ConnectivityPattern(self.stars[np.ix_(list(row_perm), list(col_perm))])

    def __eq__(self, other):
        return isinstance(other, ConnectivityPattern) and np.array_equal(self.stars, other.stars)

    def __hash__(self):
        return hash((self.stars.shape, self.stars.tobytes()))

    def __repr__(self):
        return f"ConnectivityPattern({self.rows()})"


def fully_connected(K: int, B: int | None = None) -> ConnectivityPattern:
    return ConnectivityPattern(np.ones((K, K if B is None else B), dtype=bool))


def lower_triangular(K: int) -> ConnectivityPattern:
    """The K-user path (triangular) network: Rx-k hears Tx-1..Tx-k."""
    return ConnectivityPattern(np.tril(np.ones((K, K), dtype=bool)))


@dataclass(frozen=True)
class TreeNetwork:
    """Antenna tree plus the receiver association.

    ``parent[b]`` is the parent label of antenna ``b`` (0 for top level) and
    ``rx_assoc[k]`` is the deepest antenna that receiver ``k`` hears.
    """

    parent: dict[int, int]
    rx_assoc: tuple[int, ...]
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        parent = {int(b): int(a) for b, a in dict(self.parent).items()}
        B = len(parent)
        if sorted(parent) != list(range(1, B + 1)):
            raise ValueError("antenna labels must be exactly 1..B")
        for b, a in parent.items():
            if not 0 <= a <= B or a == b:
                raise ValueError(f"antenna {b} has invalid parent {a}")
        # every antenna must reach the root
        for b in parent:
            seen, a = set(), b
            while a != 0:
                if a in seen:
                    raise ValueError(f"cycle through antenna {b}")
                seen.add(a)
                a = parent[a]
        assoc = tuple(int(a) for a in self.rx_assoc)
        if any(not 1 <= a <= B for a in assoc):
            raise ValueError("receiver associated with an unknown antenna")
        lonely = sorted(set(parent) - set(assoc))
        if lonely:
            raise ValueError(f"antenna {lonely[0]} has no associated receiver")
        children = {b: [] for b in range(B + 1)}
        for b in sorted(parent):
            children[parent[b]].append(b)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "rx_assoc", assoc)
        object.__setattr__(self, "_children", {b: tuple(c) for b, c in children.items()})

    @classmethod
    def from_parents(cls, parents: Sequence[int], rx_assoc: Sequence[int] | None = None):
        """``parents[b-1]`` is the parent of antenna ``b``; default one Rx per Tx."""
        parent = {b + 1: int(a) for b, a in enumerate(parents)}
        if rx_assoc is None:
            rx_assoc = range(1, len(parent) + 1)
        return cls(parent, tuple(rx_assoc))

    @classmethod
    def path(cls, K: int) -> "TreeNetwork":
        return cls.from_parents(range(K))

    @classmethod
    def star(cls, K: int) -> "TreeNetwork":
        return cls.from_parents([0] * K)

    @classmethod
    def from_json(cls, data: dict | str) -> "TreeNetwork":
        if isinstance(data, str):
            data = json.loads(data)
        return cls({int(b): a for b, a in data["parent"].items()}, tuple(data["rx_assoc"]))

    def to_json(self) -> dict:
        return {"parent": {str(b): a for b, a in sorted(self.parent.items())},
                "rx_assoc": list(self.rx_assoc)}

    @property
    def B(self) -> int:
        return len(self.parent)

    @property
    def K(self) -> int:
        return len(self.rx_assoc)

    def children(self, b: int) -> tuple[int, ...]:
        return self._children[b]

    def ancestors(self, b: int) -> list[int]:
        """Antennas on the path from the root down to ``b`` (inclusive), root excluded."""
        path = []
        while b != 0:
            path.append(b)
            b = self.parent[b]
        return path[::-1]

    def depth(self, b: int) -> int:
        return len(self.ancestors(b))

    def leaves(self) -> list[int]:
        return [b for b in sorted(self.parent) if not self._children[b]]

    def root_paths(self) -> list[list[int]]:
        return [self.ancestors(leaf) for leaf in self.leaves()]

    def receivers_of(self, b: int) -> list[int]:
        return [k for k, a in enumerate(self.rx_assoc) if a == b]

    def dfs_order(self) -> list[int]:
        """Preorder walk, children visited in ascending label order."""
        order, stack = [], list(reversed(self._children[0]))
        while stack:
            b = stack.pop()
            order.append(b)
            stack.extend(reversed(self._children[b]))
        return order

    def pattern(self) -> ConnectivityPattern:
        stars = np.zeros((self.K, self.B), dtype=bool)
        for k, a in enumerate(self.rx_assoc):
            for b in self.ancestors(a):
                stars[k, b - 1] = True
        return ConnectivityPattern(stars)


def tree_from_pattern(pattern: ConnectivityPattern) -> TreeNetwork:
    """Rebuild the unique tree network inducing ``pattern``.

    Tx-j is an ancestor of Tx-i exactly when the receivers hearing Tx-i form a
    strict subset of those hearing Tx-j.  Raises :class:`NotATreeError` with a
    witness when no tree induces the pattern.
    """
    S = pattern.stars
    K, B = S.shape
    supp = [frozenset(np.flatnonzero(S[:, j]).tolist()) for j in range(B)]

    for i in range(B):
        for j in range(i + 1, B):
            if supp[i] == supp[j]:
                raise NotATreeError(
                    f"Tx-{i + 1} and Tx-{j + 1} reach the same receivers",
                    {"property": "distinct-supports", "antennas": [i + 1, j + 1],
                     "receivers": sorted(supp[i])})
            common = supp[i] & supp[j]
            if common and not (supp[i] < supp[j] or supp[j] < supp[i]):
                k = min(common)
                raise NotATreeError(
                    f"Rx-{k + 1} hears Tx-{i + 1} and Tx-{j + 1}, which share no root path",
                    {"property": "single-path", "receiver": k, "antennas": [i + 1, j + 1]})

    parent = {}
    for i in range(B):
        supersets = [j for j in range(B) if supp[i] < supp[j]]
        parent[i + 1] = 1 + min(supersets, key=lambda j: len(supp[j])) if supersets else 0

    rx_assoc = []
    for k in range(K):
        heard = np.flatnonzero(S[k]) + 1
        rx_assoc.append(int(max(heard, key=lambda b: len(_chain(parent, b)))))

    covered = set(rx_assoc)
    for b in range(1, B + 1):
        if b not in covered:
            raise NotATreeError(
                f"Tx-{b} has no receiver for which it is the deepest antenna",
                {"property": "associated-receiver", "antenna": b})

    tree = TreeNetwork(parent, tuple(rx_assoc))
    regenerated = tree.pattern().stars
    if not np.array_equal(regenerated, S):
        k, b = map(int, np.argwhere(regenerated != S)[0])
        raise NotATreeError(
            f"reconstructed tree disagrees with the pattern at Rx-{k + 1}, Tx-{b + 1}",
            {"property": "round-trip", "receiver": k, "antenna": b + 1})
    return tree


def _chain(parent: dict[int, int], b: int) -> list[int]:
    out = []
    while b != 0:
        out.append(b)
        b = parent[b]
    return out


def is_tree_pattern(pattern: ConnectivityPattern) -> bool:
    try:
        tree_from_pattern(pattern)
    except NotATreeError:
        return False
    return True


# -- DoF regions -------------------------------------------------------------


def _dof_vector(d, K: int) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (K,):
        raise ValueError(f"DoF vector must have length {K}, got shape {d.shape}")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("DoF entries must be finite and non-negative")
    return d


def super_receiver_dof(tree: TreeNetwork, d) -> dict[int, float]:
    """Total DoF of the receivers associated with each antenna."""
    d = _dof_vector(d, tree.K)
    total = {b: 0.0 for b in tree.parent}
    for k, b in enumerate(tree.rx_assoc):
        total[b] += float(d[k])
    return total


def classical_region_contains(tree: TreeNetwork, d, tol: float = TOL) -> bool:
    ds = super_receiver_dof(tree, d)
    return all(sum(ds[b] for b in path) <= 1 + tol for path in tree.root_paths())


def ns_region_contains(tree: TreeNetwork, d, tol: float = TOL) -> bool:
    return all(v <= 1 + tol for v in super_receiver_dof(tree, d).values())


def fully_connected_region_contains(K: int, d, tol: float = TOL) -> bool:
    return float(_dof_vector(d, K).sum()) <= 1 + tol


def sum_dof(tree: TreeNetwork) -> tuple[int, int]:
    """(classical, non-signaling) sum-DoF: number of leaves and number of antennas."""
    return len(tree.leaves()), tree.B


def leaf_saturating_dof(tree: TreeNetwork) -> np.ndarray:
    """One DoF for one receiver of each leaf antenna, zero elsewhere.

    Each root path ends in exactly one leaf, so the tuple sits on the
    boundary of the classical region and its sum is the number of leaves.
    """
    d = np.zeros(tree.K)
    for leaf in tree.leaves():
        d[tree.receivers_of(leaf)[0]] = 1.0
    return d


# -- TDMA --------------------------------------------------------------------


@dataclass(frozen=True)
class TdmaSchedule:
    """Time intervals inside [0, 1] for every antenna and every receiver."""

    tree: TreeNetwork
    antenna: dict[int, tuple[float, float]]
    receiver: dict[int, tuple[float, float]]

    def to_json(self) -> dict:
        return {"antenna": {str(b): list(iv) for b, iv in sorted(self.antenna.items())},
                "receiver": {str(k): list(iv) for k, iv in sorted(self.receiver.items())}}

    def is_orthogonal(self, tol: float = TOL) -> bool:
        """No receiver hears two antennas whose intervals overlap."""
        S = self.tree.pattern().stars
        for k in range(self.tree.K):
            heard = sorted((self.antenna[b + 1] for b in np.flatnonzero(S[k])))
            for (s0, e0), (s1, e1) in zip(heard, heard[1:]):
                if s1 < e0 - tol:
                    return False
        # receivers sharing an antenna split its interval
        for b in self.tree.parent:
            ivs = sorted(self.receiver[k] for k in self.tree.receivers_of(b))
            for (s0, e0), (s1, e1) in zip(ivs, ivs[1:]):
                if s1 < e0 - tol:
                    return False
        return True


def tdma_schedule(tree: TreeNetwork, d, tol: float = TOL) -> TdmaSchedule:
    """Interval of Tx-k starts where its parent's ends and lasts d_sum(k)."""
    ds = super_receiver_dof(tree, d)
    if not classical_region_contains(tree, d, tol):
        worst = max(tree.root_paths(), key=lambda p: sum(ds[b] for b in p))
        raise InfeasibleDofError(
            f"path {worst} carries {sum(ds[b] for b in worst):.6g} > 1 DoF")
    d = np.asarray(d, dtype=float)
    antenna: dict[int, tuple[float, float]] = {}
    for b in tree.dfs_order():
        start = antenna[tree.parent[b]][1] if tree.parent[b] else 0.0
        antenna[b] = (start, start + ds[b])
    receiver = {}
    for b, (start, _) in antenna.items():
        t = start
        for k in tree.receivers_of(b):
            receiver[k] = (t, t + float(d[k]))
            t += float(d[k])
    return TdmaSchedule(tree, antenna, receiver)


def random_tree(rng: np.random.Generator, B: int, K: int | None = None) -> TreeNetwork:
    """Random tree on B antennas with K >= B receivers, each antenna keeping one."""
    K = B if K is None else K
    if K < B:
        raise ValueError("need at least one receiver per antenna")
    parents = [int(rng.integers(0, b)) for b in range(1, B + 1)]
    extra = rng.integers(1, B + 1, size=K - B).tolist()
    assoc = list(range(1, B + 1)) + extra
    rng.shuffle(assoc)
    return TreeNetwork.from_parents(parents, assoc)
