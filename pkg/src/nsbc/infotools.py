"""Exact entropies and mutual informations of finite joint distributions.

Probabilities stay :class:`~fractions.Fraction` throughout; floating point
only enters when the logarithms are taken at the very end.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Sequence

MAX_ATOMS = 10**7


class BudgetExceeded(ValueError):
    pass


class JointPmf:
    """Sparse joint law over named variables.

    ``table`` maps value tuples (one entry per variable, in ``variables``
    order) to exact probabilities.  Zero-probability atoms are dropped.
    """

    def __init__(self, variables: Sequence[str], table: dict[tuple, Fraction]):
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        if len(table) > MAX_ATOMS:
            raise BudgetExceeded(f"{len(table)} atoms exceed the limit of {MAX_ATOMS}")
        clean = {}
        for atom, p in table.items():
            p = Fraction(p)
            if p < 0:
                raise ValueError(f"negative probability at {atom}")
            if len(atom) != len(self.variables):
                raise ValueError(f"atom {atom} does not match variables {self.variables}")
            if p:
                clean[tuple(atom)] = clean.get(tuple(atom), 0) + p
        total = sum(clean.values())
        if total != 1:
            raise ValueError(f"probabilities sum to {total}, not 1")
        self.table = clean
        self._index = {v: i for i, v in enumerate(self.variables)}

    @classmethod
    def uniform(cls, variables: Sequence[str], alphabets: Sequence[Iterable]) -> "JointPmf":
        atoms = list(product(*alphabets))
        p = Fraction(1, len(atoms))
        return cls(variables, {a: p for a in atoms})

    def __len__(self) -> int:
        return len(self.table)

    def _positions(self, names: Iterable[str]) -> list[int]:
        out = []
        for n in names:
            if n not in self._index:
                raise KeyError(f"unknown variable {n!r}; have {self.variables}")
            out.append(self._index[n])
        return out

    def marginal(self, names: Sequence[str]) -> dict[tuple, Fraction]:
        pos = self._positions(names)
        out: dict[tuple, Fraction] = {}
        for atom, p in self.table.items():
            key = tuple(atom[i] for i in pos)
            out[key] = out.get(key, 0) + p
        return out

    def extend(self, name: str, fn: Callable[..., object], args: Sequence[str]) -> "JointPmf":
        """Append a variable that is a deterministic function of existing ones."""
        pos = self._positions(args)
        table = {atom + (fn(*(atom[i] for i in pos)),): p for atom, p in self.table.items()}
        return JointPmf(self.variables + (name,), table)

    def condition(self, event: Callable[[dict], bool]) -> "JointPmf":
        kept = {a: p for a, p in self.table.items() if event(dict(zip(self.variables, a)))}
        total = sum(kept.values())
        if not total:
            raise ValueError("conditioning on a null event")
        return JointPmf(self.variables, {a: p / total for a, p in kept.items()})


def _h(law: dict[tuple, Fraction]) -> float:
    # log2(1/p) = log2(den) - log2(num); exact ints keep this stable
    return math.fsum(float(p) * (math.log2(p.denominator) - math.log2(p.numerator))
                     for p in law.values() if p)


def _names(x) -> tuple[str, ...]:
    return (x,) if isinstance(x, str) else tuple(x)


def entropy(p: JointPmf, vars, given=()) -> float:
    """H(vars | given) in bits."""
    A, C = _names(vars), _names(given)
    if set(A) & set(C):
        raise ValueError("variable sets must be disjoint")
    if not A:
        return 0.0
    joint = _h(p.marginal(A + C))
    return joint - _h(p.marginal(C)) if C else joint


def mutual_information(p: JointPmf, A, B, given=()) -> float:
    """I(A; B | given) in bits."""
    A, B, C = _names(A), _names(B), _names(given)
    if set(A) & set(B) or (set(A) | set(B)) & set(C):
        raise ValueError("variable sets must be disjoint")
    return entropy(p, A, C) + entropy(p, B, C) - entropy(p, A + B, C)


def pmf_from_scheme(channel, input_law: JointPmf, n: int = 1,
                    budget: int = MAX_ATOMS) -> JointPmf:
    """Append the channel outputs to ``input_law`` by exact enumeration.

    ``channel`` exposes ``input_names``, ``output_names`` and
    ``transition(*inputs) -> {outputs: prob}``.  The input variables must
    already be in ``input_law``.  For ``n > 1`` each input value is a length-n
    tuple sent over n memoryless uses, and each output is the tuple of
    per-use outputs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pos = input_law._positions(channel.input_names)
    table: dict[tuple, Fraction] = {}
    cache: dict[tuple, dict] = {}
    for atom, p in input_law.table.items():
        x = tuple(atom[i] for i in pos)
        law = cache.get(x)
        if law is None:
            law = channel.transition(*x) if n == 1 else _block_law(channel, x, n)
            cache[x] = law
        for y, py in law.items():
            table[atom + tuple(y)] = table.get(atom + tuple(y), 0) + p * py
            if len(table) > budget:
                raise BudgetExceeded(f"joint pmf exceeds {budget} atoms")
    return JointPmf(input_law.variables + tuple(channel.output_names), table)


def _block_law(channel, x: tuple, n: int) -> dict[tuple, Fraction]:
    per_use = [channel.transition(*(xi[t] for xi in x)) for t in range(n)]
    law: dict[tuple, Fraction] = {}
    for combo in product(*(u.items() for u in per_use)):
        prob = math.prod((pr for _, pr in combo), start=Fraction(1))
        outs = tuple(tuple(y[j] for y, _ in combo) for j in range(len(channel.output_names)))
        law[outs] = law.get(outs, 0) + prob
    return law
