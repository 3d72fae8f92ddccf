"""Non-signaling boxes: exact tables, NS verification and a referee for staged use.

A box has ``kappa`` parties.  Party ``i`` submits an input ``a_i`` and gets
an output ``b_i``; the box is non-signaling when the joint law of any subset
of outputs depends only on the inputs of that subset.  Parties are indexed
from 0; for the broadcast boxes party 0 is the transmitter.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .field import GF, parse_field

MAX_TABLE = 10**7


class TableTooLarge(ValueError):
    pass


class NotNonSignalingError(ValueError):
    def __init__(self, message: str, verdict: "NSVerdict"):
        super().__init__(message)
        self.verdict = verdict


class RefereeError(RuntimeError):
    pass


def _freeze(v):
    """JSON lists -> tuples so values can key dicts."""
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def _sample_law(law: dict, rng: np.random.Generator):
    keys = list(law)
    if len(keys) == 1:
        return keys[0]
    p = np.array([float(law[k]) for k in keys])
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


# -- tabular boxes -----------------------------------------------------------


@dataclass
class NSVerdict:
    ok: bool
    subset: tuple[int, ...] | None = None
    inputs: tuple[tuple, tuple] | None = None

    def __bool__(self):
        return self.ok


class TabularBox:
    """Exact conditional table ``Z(b | a)`` with rational entries.

    ``table`` maps every full input tuple to a sparse dict from output
    tuples to :class:`~fractions.Fraction` probabilities.
    """

    def __init__(self, input_alphabets: Sequence[Sequence[Hashable]],
                 output_alphabets: Sequence[Sequence[Hashable]],
                 table: dict[tuple, dict[tuple, Fraction]]):
        self.input_alphabets = [tuple(a) for a in input_alphabets]
        self.output_alphabets = [tuple(b) for b in output_alphabets]
        if len(self.input_alphabets) != len(self.output_alphabets):
            raise ValueError("input and output alphabets disagree on the party count")
        self.kappa = len(self.input_alphabets)
        n_in = math.prod(len(a) for a in self.input_alphabets)
        n_out = math.prod(len(b) for b in self.output_alphabets)
        if n_in * n_out > MAX_TABLE:
            raise TableTooLarge(f"table has {n_in * n_out} cells (limit {MAX_TABLE})")
        out_sets = [set(b) for b in self.output_alphabets]
        self.table: dict[tuple, dict[tuple, Fraction]] = {}
        for a in product(*self.input_alphabets):
            row = table.get(a)
            if row is None:
                raise ValueError(f"missing conditional for inputs {a}")
            clean = {}
            for b, p in row.items():
                p = Fraction(p)
                if p < 0:
                    raise ValueError(f"negative probability at {a} -> {b}")
                if len(b) != self.kappa or any(x not in s for x, s in zip(b, out_sets)):
                    raise ValueError(f"output {b} outside the output alphabets")
                if p:
                    clean[tuple(b)] = p
            if sum(clean.values()) != 1:
                raise ValueError(f"conditional for inputs {a} sums to {sum(clean.values())}")
            self.table[a] = clean
        if len(table) != n_in:
            raise ValueError("table has entries for inputs outside the alphabets")

    def conditional(self, inputs: tuple) -> dict[tuple, Fraction]:
        return self.table[tuple(inputs)]

    def marginal(self, subset: Sequence[int], inputs: tuple) -> dict[tuple, Fraction]:
        """Law of the outputs in ``subset`` given the full input tuple."""
        out: dict[tuple, Fraction] = {}
        for b, p in self.table[tuple(inputs)].items():
            key = tuple(b[i] for i in subset)
            out[key] = out.get(key, 0) + p
        return out

    def stage(self, party: int, inputs: dict, outputs: dict, rng: np.random.Generator):
        """Chain-rule sample of ``party``'s output given what is fixed so far.

        Unsubmitted inputs are filled arbitrarily: for an NS box the law of
        the submitted parties' outputs does not depend on them.
        """
        full = tuple(inputs.get(i, self.input_alphabets[i][0]) for i in range(self.kappa))
        law: dict = {}
        for b, p in self.table[full].items():
            if all(b[j] == v for j, v in outputs.items()):
                law[b[party]] = law.get(b[party], 0) + p
        if not law:
            raise RefereeError("delivered outputs have zero probability")
        return _sample_law(law, rng)

    # -- JSON -----------------------------------------------------------------

    def to_json(self) -> dict:
        entries = [{"a": _thaw(a), "b": _thaw(b), "p": f"{p.numerator}/{p.denominator}"}
                   for a, row in self.table.items() for b, p in row.items()]
        return {"inputs": [_thaw(a) for a in self.input_alphabets],
                "outputs": [_thaw(b) for b in self.output_alphabets],
                "entries": entries}

    @classmethod
    def from_json(cls, data: dict | str) -> "TabularBox":
        if isinstance(data, str):
            data = json.loads(data)
        table: dict[tuple, dict[tuple, Fraction]] = {}
        for e in data["entries"]:
            a, b = _freeze(e["a"]), _freeze(e["b"])
            row = table.setdefault(a, {})
            row[b] = row.get(b, 0) + Fraction(e["p"])
        ins = [[_freeze(x) for x in alph] for alph in data["inputs"]]
        for a in product(*ins):
            table.setdefault(a, {})
        return cls(ins, [[_freeze(x) for x in alph] for alph in data["outputs"]], table)


def verify_nonsignaling(box: TabularBox) -> NSVerdict:
    """Exact check of the NS condition for every nonempty proper party subset.

    Subsets are scanned by size, then lexicographically; the first failure is
    returned as the witness together with two input tuples that agree on the
    subset yet give different output marginals.
    """
    k = box.kappa
    inputs = list(product(*box.input_alphabets))
    for size in range(1, k):
        for subset in combinations(range(k), size):
            seen: dict[tuple, tuple[tuple, dict]] = {}
            for a in inputs:
                key = tuple(a[i] for i in subset)
                m = box.marginal(subset, a)
                if key not in seen:
                    seen[key] = (a, m)
                elif seen[key][1] != m:
                    return NSVerdict(False, subset, (seen[key][0], a))
    return NSVerdict(True)


# -- structured boxes ----------------------------------------------------------


class StructuredBox:
    """Closed-form box; subclasses supply ``stage`` and ``conditional``."""

    kappa: int
    certified = "certified-by-construction"

    def input_alphabets(self) -> list[tuple]:
        raise NotImplementedError

    def output_alphabets(self) -> list[tuple]:
        raise NotImplementedError

    def conditional(self, inputs: tuple) -> dict[tuple, Fraction]:
        raise NotImplementedError

    def stage(self, party: int, inputs: dict, outputs: dict, rng: np.random.Generator):
        raise NotImplementedError

    def relation(self, inputs: tuple, outputs: tuple) -> bool:
        raise NotImplementedError

    def sample(self, inputs: tuple, rng: np.random.Generator) -> tuple:
        """Joint outputs given all inputs, drawn party by party."""
        given = dict(enumerate(inputs))
        outs: dict[int, Any] = {}
        for i in range(self.kappa):
            outs[i] = self.stage(i, given, outs, rng)
        return tuple(outs[i] for i in range(self.kappa))

    def marginal(self, party: int, value) -> dict:
        """Law of one party's output given only its own input."""
        alph = self.input_alphabets()
        full = tuple(value if i == party else alph[i][0] for i in range(self.kappa))
        law: dict = {}
        for b, p in self.conditional(full).items():
            law[b[party]] = law.get(b[party], 0) + p
        return law

    def tabularize(self) -> TabularBox:
        ins = self.input_alphabets()
        return TabularBox(ins, self.output_alphabets(),
                          {a: self.conditional(a) for a in product(*ins)})


class _Group:
    """Additive group used by sum-relation boxes: GF(q) or integers mod n."""

    def __init__(self, field: GF | None = None, modulus: int | None = None):
        self.field = field
        self.n = field.q if field is not None else modulus

    def add(self, a, b):
        return self.field.add(a, b) if self.field else (a + b) % self.n

    def neg(self, a):
        return self.field.neg(a) if self.field else (-a) % self.n

    def elements(self):
        return range(self.n)


class SumBox(StructuredBox):
    """Outputs uniform subject to one relation ``sum_i c_i b_i = g(a)``, c_i = +-1.

    Any kappa - 1 outputs are i.i.d. uniform, and the last is pinned by the
    relation, so every proper subset of outputs is uniform whatever the
    inputs.  That is the non-signaling property.
    """

    def __init__(self, group: _Group, signs: Sequence[int], g: Callable[[tuple], int],
                 alphabets: list[tuple] | None, name: str):
        self.group = group
        self.signs = tuple(signs)
        self.g = g
        self.kappa = len(self.signs)
        self._alphabets = alphabets
        self.name = name

    def _signed(self, i, x):
        return x if self.signs[i] == 1 else self.group.neg(x)

    def input_alphabets(self):
        if self._alphabets is None:
            raise TableTooLarge(f"{self.name} box has no finite input alphabet")
        return self._alphabets

    def output_alphabets(self):
        return [tuple(self.group.elements())] * self.kappa

    def _pinned(self, party: int, inputs: tuple, outs: dict):
        acc = self.g(inputs)
        for j, v in outs.items():
            if j != party:
                acc = self.group.add(acc, self.group.neg(self._signed(j, v)))
        return self._signed(party, acc)

    def stage(self, party, inputs, outputs, rng):
        if len(outputs) == self.kappa - 1:
            full = tuple(inputs[i] for i in range(self.kappa))
            return self._pinned(party, full, outputs)
        return int(rng.integers(self.group.n))

    def sample_batch(self, g_values, rng: np.random.Generator) -> np.ndarray:
        """Outputs for many independent uses, given ``g(a)`` for each use.

        Same law as submitting to a fresh session per use in party order;
        returns an (n, kappa) array.
        """
        g_values = np.asarray(g_values, dtype=np.int64)
        n = len(g_values)
        out = np.empty((n, self.kappa), dtype=np.int64)
        out[:, :-1] = rng.integers(self.group.n, size=(n, self.kappa - 1))
        acc = g_values
        for j in range(self.kappa - 1):
            acc = self.group.add(acc, self.group.neg(self._signed(j, out[:, j])))
        out[:, -1] = self._signed(self.kappa - 1, acc)
        return out

    def conditional(self, inputs):
        n = self.group.n
        p = Fraction(1, n ** (self.kappa - 1))
        law = {}
        for head in product(range(n), repeat=self.kappa - 1):
            outs = dict(enumerate(head))
            last = self._pinned(self.kappa - 1, tuple(inputs), outs)
            law[head + (last,)] = p
        return law

    def marginal(self, party, value):
        p = Fraction(1, self.group.n)
        return {b: p for b in self.group.elements()}

    def relation(self, inputs, outputs):
        acc = 0
        for i, v in enumerate(outputs):
            acc = self.group.add(acc, self._signed(i, v))
        return acc == self.g(tuple(inputs))


def _vectors(field: GF, n: int) -> tuple:
    return tuple(product(range(field.q), repeat=n))


def make_otp_box(field: GF | str, k: int) -> SumBox:
    """Stage-k inner-product box: inputs s, t in GF(q)^(k-1); u + v = s . t.

    Party 0 (transmitter) submits s and gets u, party 1 (Rx-k) submits t and
    gets v.  Inputs are tuples of field elements.
    """
    F = parse_field(field)
    if k < 2:
        raise ValueError("stage index k must be >= 2")

    def inner(a):
        s, t = a
        acc = 0
        for x, y in zip(s, t):
            acc = F.add(acc, F.mul(x, y))
        return acc

    vec = _vectors(F, k - 1) if F.q ** (k - 1) <= 4096 else None
    return SumBox(_Group(F), (1, 1), inner, None if vec is None else [vec, vec], f"otp-{k}")


def make_fading_dirt_box(field: GF | str) -> SumBox:
    """Tx submits S, gets U; Rx submits T, gets V = U + S*T."""
    F = parse_field(field)
    elems = tuple(range(F.q))
    return SumBox(_Group(F), (-1, 1), lambda a: F.mul(a[0], a[1]), [elems, elems], "fading-dirt")


def make_mac_box(field: GF | str, K: int, f: Callable[..., int],
                 state_alphabets: Sequence[Sequence] | None = None) -> SumBox:
    """K transmitters and one receiver: V = U_1 + ... + U_K + f(T, S_1, ..., S_K).

    Parties ``0..K-1`` are the transmitters (input S_k, output U_k) and
    party ``K`` is the receiver (input T, output V).  ``f`` must return a
    field element.  ``state_alphabets`` lists [S_1, ..., S_K, T] alphabets for
    tabulation and defaults to the field itself.
    """
    F = parse_field(field)

    def g(a):
        v = f(a[-1], *a[:-1])
        if not (isinstance(v, (int, np.integer)) and 0 <= v < F.q):
            raise ValueError(f"f returned {v!r}, not an element of {F}")
        return int(v)

    alph = [tuple(s) for s in state_alphabets] if state_alphabets else [tuple(range(F.q))] * (K + 1)
    if len(alph) != K + 1:
        raise ValueError("need K + 1 state alphabets")
    return SumBox(_Group(F), (-1,) * K + (1,), g, alph, "mac")


def mod_size(P: float) -> int:
    """ceil(sqrt(P)), exact for integer P."""
    if P <= 0:
        raise ValueError("power must be positive")
    if float(P).is_integer():
        n = int(P)
        return math.isqrt(n - 1) + 1
    return math.ceil(math.sqrt(P))


def make_gaussian_mod_box(P: float, k: int, input_alphabets: list[tuple] | None = None) -> SumBox:
    """Real-input box: u + v = floor(s . t) mod ceil(sqrt(P)), u uniform."""
    M = mod_size(P)

    def g(a):
        s, t = a
        return math.floor(float(np.dot(s, t))) % M

    return SumBox(_Group(modulus=M), (1, 1), g, input_alphabets, f"gaussian-mod-{k}")


class TriangularBox(StructuredBox):
    """(K+1)-party box: v = s + L(t) u with L(t) unit lower-triangular.

    Party 0 submits s in GF(q)^K and gets u, uniform on GF(q)^K.  Party k
    (1..K) submits the row t_k in GF(q)^(k-1) and gets v_k.
    """

    def __init__(self, field: GF | str, K: int):
        self.field = parse_field(field)
        self.K = K
        self.kappa = K + 1

    def input_alphabets(self):
        F = self.field
        return [_vectors(F, self.K)] + [_vectors(F, k - 1) for k in range(1, self.K + 1)]

    def output_alphabets(self):
        F = self.field
        return [_vectors(F, self.K)] + [tuple(range(F.q))] * self.K

    def _v(self, k: int, s, t, u) -> int:
        # v_k = s_k + sum_{i<k} t_ki u_i + u_k, with k 1-based
        F = self.field
        acc = F.add(s[k - 1], u[k - 1])
        for i in range(k - 1):
            acc = F.add(acc, F.mul(t[i], u[i]))
        return acc

    def stage(self, party, inputs, outputs, rng):
        F = self.field
        if party == 0:
            s = inputs[0]
            u = []
            # receivers already served pin their u_k; the rest are free
            for k in range(1, self.K + 1):
                if k in outputs:
                    t = inputs[k]
                    acc = F.sub(outputs[k], s[k - 1])
                    for i in range(k - 1):
                        acc = F.sub(acc, F.mul(t[i], u[i]))
                    u.append(acc)
                else:
                    u.append(int(rng.integers(F.q)))
            return tuple(u)
        if 0 in outputs:
            return self._v(party, inputs[0], inputs[party], outputs[0])
        # without u every v_k is an independent uniform
        return int(rng.integers(F.q))

    def conditional(self, inputs):
        s, ts = inputs[0], inputs[1:]
        p = Fraction(1, self.field.q ** self.K)
        law = {}
        for u in product(range(self.field.q), repeat=self.K):
            v = tuple(self._v(k, s, ts[k - 1], u) for k in range(1, self.K + 1))
            law[(u,) + v] = p
        return law

    def marginal(self, party, value):
        F = self.field
        if party == 0:
            p = Fraction(1, F.q ** self.K)
            return {u: p for u in product(range(F.q), repeat=self.K)}
        return {v: Fraction(1, F.q) for v in range(F.q)}

    def relation(self, inputs, outputs):
        s, u = inputs[0], outputs[0]
        return all(outputs[k] == self._v(k, s, inputs[k], u) for k in range(1, self.K + 1))


def make_triangular_box(field: GF | str, K: int) -> TriangularBox:
    return TriangularBox(field, K)


def make_leak_box() -> TabularBox:
    """Signaling two-party box: party 1 learns party 0's input."""
    table = {(a, 0): {(0, a): Fraction(1)} for a in (0, 1)}
    return TabularBox([(0, 1), (0,)], [(0,), (0, 1)], table)


# -- referee ----------------------------------------------------------------------


class RefereeSession:
    """Simulated spatially separated use of one box.

    Each party submits once, in any order, and immediately receives its
    output, sampled from the law conditioned on everything fixed so far.
    """

    def __init__(self, box, rng: np.random.Generator):
        self.box = box
        self.rng = rng
        self.fixed_inputs: dict[int, Any] = {}
        self.delivered_outputs: dict[int, Any] = {}

    def submit(self, party: int, value):
        if not 0 <= party < self.box.kappa:
            raise RefereeError(f"no party {party} in a {self.box.kappa}-party box")
        if party in self.fixed_inputs:
            raise RefereeError(f"party {party} already submitted")
        self.fixed_inputs[party] = value
        out = self.box.stage(party, self.fixed_inputs, self.delivered_outputs, self.rng)
        self.delivered_outputs[party] = out
        return out

    @property
    def complete(self) -> bool:
        return len(self.delivered_outputs) == self.box.kappa

    def transcript(self) -> tuple[tuple, tuple]:
        k = self.box.kappa
        return (tuple(self.fixed_inputs.get(i) for i in range(k)),
                tuple(self.delivered_outputs.get(i) for i in range(k)))


def referee_open(box, rng: np.random.Generator | None = None) -> RefereeSession:
    """Open a session; tabular boxes must pass the NS check first."""
    if isinstance(box, TabularBox):
        verdict = verify_nonsignaling(box)
        if not verdict.ok:
            raise NotNonSignalingError(
                f"box signals: outputs of parties {verdict.subset} depend on other inputs", verdict)
    elif not isinstance(box, StructuredBox):
        raise TypeError(f"not a box: {type(box).__name__}")
    return RefereeSession(box, rng if rng is not None else np.random.default_rng())


def referee_input(session: RefereeSession, party: int, value):
    return session.submit(party, value)
