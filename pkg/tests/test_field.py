from __future__ import annotations

import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsbc.field import (GF, FieldElement, batch_rank, field_of_order, is_irreducible, parse_field,
                        prime_power, rank)

ORDERS = [2, 3, 4, 5, 7, 8, 9, 16, 25, 27, 49, 121, 256, 257, 625, 1024, 65536]


@st.composite
def field_and_elems(draw, n=3):
    q = draw(st.sampled_from(ORDERS))
    F = field_of_order(q)
    return F, [draw(st.integers(0, q - 1)) for _ in range(n)]


@settings(max_examples=300, deadline=None)
@given(field_and_elems())
def test_field_axioms(fe):
    F, (a, b, c) = fe
    assert F.add(a, b) == F.add(b, a)
    assert F.mul(a, b) == F.mul(b, a)
    assert F.add(F.add(a, b), c) == F.add(a, F.add(b, c))
    assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))
    assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
    assert F.add(a, 0) == a and F.mul(a, 1) == a
    assert F.add(a, F.neg(a)) == 0
    assert F.sub(F.add(a, b), b) == a
    if a:
        assert F.mul(a, F.inv(a)) == 1
        assert F.div(F.mul(b, a), a) == b


@settings(max_examples=60, deadline=None)
@given(field_and_elems(n=1))
def test_frobenius_and_fermat(fe):
    F, (a,) = fe
    # x^q = x for every element, and (a + 1)^p = a^p + 1
    assert F.power(a, F.q) == a
    assert F.power(F.add(a, 1), F.p) == F.add(F.power(a, F.p), 1)


@pytest.mark.parametrize("q", ORDERS)
def test_array_ops_agree_with_scalar_ops(q):
    F = field_of_order(q)
    rng = np.random.default_rng(q)
    a = F.random(rng, 200)
    b = F.random_nonzero(rng, 200)
    assert F.add(a, b).tolist() == [F.add(int(x), int(y)) for x, y in zip(a, b)]
    assert F.mul(a, b).tolist() == [F.mul(int(x), int(y)) for x, y in zip(a, b)]
    assert F.div(a, b).tolist() == [F.div(int(x), int(y)) for x, y in zip(a, b)]


@pytest.mark.parametrize("q", [4, 8, 9, 16, 27, 49, 256, 1024])
def test_multiplicative_group_is_cyclic_with_generator_x(q):
    F = field_of_order(q)
    # the defining polynomial is primitive, so x (encoded as p) generates
    x = F.p
    seen = {F.power(x, k) for k in range(q - 1)}
    assert seen == set(range(1, q))


def test_canonical_polynomials():
    # GF(4) = F2[x]/(x^2+x+1), GF(8) uses x^3+x+1, GF(9) uses x^2+2x+2
    assert field_of_order(4).poly == (1, 1, 1)
    assert field_of_order(8).poly == (1, 1, 0, 1)
    assert field_of_order(9).poly == (2, 2, 1)
    for q in (4, 8, 9, 16, 25, 27, 49, 121):
        F = field_of_order(q)
        assert is_irreducible(F.poly, F.p)


def test_small_tables_by_hand():
    F = field_of_order(4)
    # with x^2 = x + 1: x * x = x + 1 -> 2 * 2 = 3, x * (x + 1) = 1
    assert F.mul(2, 2) == 3
    assert F.mul(2, 3) == 1
    assert F.add(2, 3) == 1
    G = field_of_order(3)
    assert G.mul(2, 2) == 1 and G.inv(2) == 2


def test_gf5_inverses_and_division():
    F = field_of_order(5)
    assert [F.inv(a) for a in range(1, 5)] == [1, 3, 2, 4]
    assert F.div(3, 4) == 2


def test_gf7_inverse_of_three():
    assert field_of_order(7).inv(3) == 5


def test_parse_field_forms():
    assert parse_field("GF(9)") is parse_field("GF(3^2)")
    assert parse_field(9) is parse_field("GF(9)")
    assert parse_field("GF(9)").name == "GF(9)"
    for bad in ("GF(6)", "GF(1)", "GF(0)", "F9", "GF(2^17)", 12):
        with pytest.raises(ValueError):
            parse_field(bad)


def test_prime_power():
    assert prime_power(81) == (3, 4)
    assert prime_power(2) == (2, 1)
    with pytest.raises(ValueError):
        prime_power(10)


def test_inverse_of_zero_raises():
    F = field_of_order(8)
    with pytest.raises(ZeroDivisionError):
        F.inv(0)
    with pytest.raises(ZeroDivisionError):
        F.inv(np.array([1, 0]))


def test_field_element_wrapper():
    F = field_of_order(5)
    a, b = F(3), F(4)
    assert int(a + b) == 2
    assert int(a * b) == 2
    assert int(a / b) == 2
    assert int(-a) == 2
    assert int(a ** 3) == 2
    assert int(a.inverse()) == 2
    with pytest.raises(ValueError):
        a + field_of_order(7)(1)
    with pytest.raises(ZeroDivisionError):
        F(0).inverse()
    assert isinstance(a, FieldElement)


def test_pickle_round_trip_keeps_identity():
    F = field_of_order(27)
    assert pickle.loads(pickle.dumps(F)) is F


def test_rank_examples():
    F = field_of_order(2)
    assert rank(F, [[1, 1], [1, 1]]) == 1
    assert rank(F, [[1, 1, 0], [0, 1, 1], [1, 0, 1]]) == 2  # rows sum to zero in GF(2)
    G = field_of_order(3)
    assert rank(G, [[1, 1, 0], [0, 1, 1], [1, 0, 1]]) == 3
    assert rank(G, np.zeros((0, 3))) == 0


@settings(max_examples=80, deadline=None)
@given(st.sampled_from([2, 3, 4, 5, 8, 9]), st.integers(1, 5), st.integers(1, 5),
       st.integers(0, 2**32 - 1))
def test_batch_rank_matches_row_reduction_invariants(q, K, B, seed):
    F = field_of_order(q)
    rng = np.random.default_rng(seed)
    A = F.random(rng, (K, B))
    r = rank(F, A)
    assert 0 <= r <= min(K, B)
    assert rank(F, A.T) == r
    # appending a combination of existing rows leaves the rank alone
    c = F.random(rng, K)
    extra = F.dot(A.T, c)
    assert rank(F, np.vstack([A, extra])) == r
    # scaling a row by a nonzero element too
    s = F.random_nonzero(rng, K)
    assert rank(F, F.scale_rows(A, s)) == r


def test_batch_rank_stack():
    F = field_of_order(3)
    mats = np.array([np.eye(3, dtype=np.int64), np.zeros((3, 3), dtype=np.int64),
                     [[1, 2, 0], [2, 1, 0], [0, 0, 1]]])
    assert batch_rank(F, mats).tolist() == [3, 0, 2]


def test_gf_constructor_rejects_huge():
    with pytest.raises(ValueError):
        GF(2, 17)
