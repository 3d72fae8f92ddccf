from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nsbc.channel import FadingDirtChannel, make_toy1, make_toy2
from nsbc.field import field_of_order
from nsbc.infotools import BudgetExceeded, JointPmf, entropy, mutual_information, pmf_from_scheme
from nsbc.schemes import classical_toy1_f3, classical_toy_certificate, toy_scheme_pmf


def test_entropy_examples():
    p = JointPmf.uniform(("A", "B"), (range(4), range(2)))
    assert entropy(p, "A") == 2.0
    assert entropy(p, ("A", "B")) == 3.0
    assert entropy(p, "A", given="B") == 2.0
    assert mutual_information(p, "A", "B") == 0.0
    q = JointPmf(("X",), {(0,): Fraction(1, 4), (1,): Fraction(3, 4)})
    assert entropy(q, "X") == pytest.approx(0.25 * 2 + 0.75 * math.log2(4 / 3))


def test_copy_has_full_information():
    p = JointPmf.uniform(("A",), (range(3),)).extend("B", lambda a: a, ("A",))
    assert mutual_information(p, "A", "B") == pytest.approx(math.log2(3))
    assert entropy(p, "B", "A") == 0.0


def test_xor_is_pairwise_independent():
    p = JointPmf.uniform(("A", "B"), ((0, 1), (0, 1))).extend("C", lambda a, b: a ^ b, ("A", "B"))
    assert mutual_information(p, "A", "C") == 0.0
    assert mutual_information(p, "A", "C", given="B") == pytest.approx(1.0)


def test_validation():
    with pytest.raises(ValueError):
        JointPmf(("A",), {(0,): Fraction(1, 2)})
    with pytest.raises(ValueError):
        JointPmf(("A", "A"), {(0, 0): 1})
    p = JointPmf.uniform(("A", "B"), (range(2), range(2)))
    with pytest.raises(ValueError):
        entropy(p, "A", given="A")
    with pytest.raises(KeyError):
        entropy(p, "C")
    with pytest.raises(ValueError):
        p.condition(lambda v: v["A"] > 5)
    assert entropy(p.condition(lambda v: v["A"] == 1), "A") == 0.0


def test_toy1_gf3_certificate():
    p = toy_scheme_pmf(make_toy1("GF(3)"))
    # 9 message pairs times 2 coefficient values
    assert len(p) == 18
    c = classical_toy1_f3()
    lq = math.log2(3)
    assert c.values["I(U;Y2)"] == pytest.approx(lq / 2)
    assert c.values["H(Y1|U)"] == pytest.approx(lq)
    assert c.values["R1+R2"] == pytest.approx(1.5 * lq)
    assert c.check()
    rows = {r["quantity"]: r for r in c.to_json()["rows"]}
    assert rows["R1+R2"]["ok"] is True


@pytest.mark.parametrize("q", [2, 3, 4, 5])
def test_toy_certificates_by_field(q):
    for ch in (make_toy1(f"GF({q})"), make_toy2(f"GF({q})")):
        c = classical_toy_certificate(ch)
        assert c.check()
        # rate to Rx-2: the coefficient hides W1 except when G = 1
        assert c.values["I(U;Y2)"] == pytest.approx(math.log2(q) / (q - 1))


def test_block_enumeration_matches_single_use():
    ch = FadingDirtChannel(field_of_order(2))
    one = pmf_from_scheme(ch, JointPmf.uniform(("X",), (range(2),)))
    two = pmf_from_scheme(ch, JointPmf.uniform(("X",), ([(0, 0), (0, 1), (1, 0), (1, 1)],)), n=2)
    assert mutual_information(two, "X", ("Y", "G")) == pytest.approx(
        2 * mutual_information(one, "X", ("Y", "G")))
    with pytest.raises(BudgetExceeded):
        pmf_from_scheme(ch, JointPmf.uniform(("X",), (range(2),)), budget=3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=6, max_size=6), st.integers(2, 3))
def test_data_processing_and_chain_rule(weights, m):
    # A -> B -> C with C = f(B); I(A;C) <= I(A;B)
    atoms = [(a, b) for a in range(2) for b in range(3)]
    total = sum(weights)
    p = JointPmf(("A", "B"), {x: Fraction(w, total) for x, w in zip(atoms, weights)})
    p = p.extend("C", lambda b: b % m, ("B",))
    assert mutual_information(p, "A", "C") <= mutual_information(p, "A", "B") + 1e-12
    lhs = entropy(p, ("A", "B"))
    assert lhs == pytest.approx(entropy(p, "A") + entropy(p, "B", "A"))
    assert mutual_information(p, "A", "B") >= -1e-12
