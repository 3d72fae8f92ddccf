from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsbc.topology import (ConnectivityPattern, InfeasibleDofError, NotATreeError, PatternError,
                           TreeNetwork, classical_region_contains, fully_connected,
                           fully_connected_region_contains, is_tree_pattern, leaf_saturating_dof,
                           lower_triangular, ns_region_contains, random_tree, sum_dof,
                           super_receiver_dof, tdma_schedule, tree_from_pattern)

# the 7 x 5 introductory example network
INTRO_ROWS = ["*0*00", "*0*00", "***00", "00*00", "00*00", "00**0", "00***"]


def test_pattern_validation():
    with pytest.raises(PatternError):
        ConnectivityPattern.from_rows(["**", "00"])
    with pytest.raises(PatternError):
        ConnectivityPattern.from_rows(["*0", "*0"])
    with pytest.raises(PatternError):
        ConnectivityPattern.from_rows(["*x"])
    with pytest.raises(PatternError):
        ConnectivityPattern.from_rows(["**", "*"])


def test_pattern_json_round_trip():
    p = ConnectivityPattern.from_rows(INTRO_ROWS)
    blob = json.dumps(p.to_json())
    assert ConnectivityPattern.from_json(blob) == p
    assert p.K == 7 and p.B == 5 and p.n_stars == 14
    with pytest.raises(PatternError):
        ConnectivityPattern.from_json({"K": 3, "rows": INTRO_ROWS})


def test_intro_tree_reconstruction():
    tree = tree_from_pattern(ConnectivityPattern.from_rows(INTRO_ROWS))
    assert tree.parent == {1: 3, 2: 1, 3: 0, 4: 3, 5: 4}
    assert tree.rx_assoc == (1, 1, 2, 3, 3, 4, 5)
    assert tree.leaves() == [2, 5]
    assert tree.depth(3) == 1 and tree.depth(5) == 3
    assert sum_dof(tree) == (2, 5)
    assert tree.dfs_order() == [3, 1, 2, 4, 5]


def test_path_and_star():
    path = tree_from_pattern(lower_triangular(4))
    assert path == TreeNetwork.path(4)
    assert path.leaves() == [4]
    assert sum_dof(path) == (1, 4)
    star = TreeNetwork.star(4)
    assert star.pattern() == ConnectivityPattern(np.eye(4, dtype=bool))
    assert sum_dof(star) == (4, 4)


def test_rejections_carry_witnesses():
    with pytest.raises(NotATreeError) as e:
        tree_from_pattern(fully_connected(2))
    assert e.value.witness["property"] == "distinct-supports"
    with pytest.raises(NotATreeError) as e:
        tree_from_pattern(ConnectivityPattern.from_rows(["**", "*0", "0*"]))
    assert e.value.witness["property"] == "single-path"
    assert e.value.witness["receiver"] == 0
    # nested supports, but Tx-2 is nobody's deepest antenna
    with pytest.raises(NotATreeError) as e:
        tree_from_pattern(ConnectivityPattern.from_rows(["**0", "0**"]))
    assert e.value.witness == {"property": "associated-receiver", "antenna": 2}
    assert not is_tree_pattern(fully_connected(3))


def test_region_examples():
    path = TreeNetwork.path(4)
    star = TreeNetwork.star(4)
    assert not classical_region_contains(path, [1, 1, 1, 1])
    assert classical_region_contains(path, [0.3, 0.3, 0.3, 0.1])
    assert classical_region_contains(star, [1, 1, 1, 1])
    assert ns_region_contains(path, [1, 1, 1, 1])
    assert not ns_region_contains(path, [1.5, 0, 0, 0])
    intro = tree_from_pattern(ConnectivityPattern.from_rows(INTRO_ROWS))
    assert ns_region_contains(intro, [0.5, 0.5, 1, 0.25, 0.75, 1, 1])
    assert fully_connected_region_contains(3, [1 / 3] * 3)
    assert not fully_connected_region_contains(3, [0.5] * 3)
    assert fully_connected_region_contains(1, [1])
    with pytest.raises(ValueError):
        classical_region_contains(path, [0.1, 0.1])
    with pytest.raises(ValueError):
        ns_region_contains(path, [-0.1, 0, 0, 0])


def test_super_receiver_dof_sums_shared_antennas():
    intro = tree_from_pattern(ConnectivityPattern.from_rows(INTRO_ROWS))
    ds = super_receiver_dof(intro, [0.1, 0.2, 0.3, 0.1, 0.1, 0.2, 0.4])
    assert ds[1] == pytest.approx(0.3)
    assert ds[3] == pytest.approx(0.2)


def test_tdma_path_quarters_and_star():
    s = tdma_schedule(TreeNetwork.path(4), [0.25] * 4)
    assert [s.antenna[b] for b in range(1, 5)] == [(0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)]
    s = tdma_schedule(TreeNetwork.star(4), [1, 1, 1, 1])
    assert all(s.antenna[b] == (0.0, 1.0) for b in range(1, 5))
    assert s.is_orthogonal()
    with pytest.raises(InfeasibleDofError):
        tdma_schedule(TreeNetwork.path(2), [0.6, 0.6])


def test_tdma_shared_antenna_splits_its_interval():
    intro = tree_from_pattern(ConnectivityPattern.from_rows(INTRO_ROWS))
    d = [0.1, 0.2, 0.3, 0.1, 0.1, 0.2, 0.4]
    s = tdma_schedule(intro, d)
    # Tx-3 first (receivers 3, 4), then Tx-1 (receivers 0, 1), then Tx-2
    assert s.receiver[3] == pytest.approx((0.0, 0.1))
    assert s.receiver[4] == pytest.approx((0.1, 0.2))
    assert s.receiver[0] == pytest.approx((0.2, 0.3))
    assert s.receiver[1] == pytest.approx((0.3, 0.5))
    assert s.receiver[2] == pytest.approx((0.5, 0.8))
    assert s.is_orthogonal()


def test_leaf_saturating_dof():
    intro = tree_from_pattern(ConnectivityPattern.from_rows(INTRO_ROWS))
    d = leaf_saturating_dof(intro)
    assert d.sum() == 2
    assert classical_region_contains(intro, d)
    assert not classical_region_contains(intro, d + 0.01)


@st.composite
def trees(draw, max_b=8):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    B = draw(st.integers(1, max_b))
    K = draw(st.integers(B, max_b + 2))
    return random_tree(rng, B, K), rng


@settings(max_examples=150, deadline=None)
@given(trees())
def test_tree_pattern_round_trip(tr):
    tree, _ = tr
    rebuilt = tree_from_pattern(tree.pattern())
    assert rebuilt.pattern() == tree.pattern()
    assert rebuilt.parent == tree.parent
    assert rebuilt.rx_assoc == tree.rx_assoc


@settings(max_examples=150, deadline=None)
@given(trees())
def test_schedule_orthogonal_and_regions_nested(tr):
    tree, rng = tr
    d = rng.uniform(0, 1, tree.K)
    heaviest = max(sum(d[k] for b in path for k in tree.receivers_of(b)) for path in tree.root_paths())
    d = d / max(1.0, heaviest)
    assert classical_region_contains(tree, d)
    assert ns_region_contains(tree, d)
    # monotone: shrinking stays inside
    assert classical_region_contains(tree, d * rng.uniform(0, 1, tree.K))
    s = tdma_schedule(tree, d)
    assert s.is_orthogonal()
    for k in range(tree.K):
        a, b = s.receiver[k]
        assert b - a == pytest.approx(d[k])
        assert 0 <= a and b <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(trees())
def test_classical_region_inside_ns_region(tr):
    tree, rng = tr
    d = rng.uniform(0, 1.2, tree.K)
    if classical_region_contains(tree, d):
        assert ns_region_contains(tree, d)


def test_tree_json_round_trip():
    tree = tree_from_pattern(ConnectivityPattern.from_rows(INTRO_ROWS))
    assert TreeNetwork.from_json(json.dumps(tree.to_json())) == tree


def test_tree_validation():
    with pytest.raises(ValueError):
        TreeNetwork({1: 2, 2: 1}, (1, 2))  # cycle
    with pytest.raises(ValueError):
        TreeNetwork({1: 0, 2: 1}, (1, 1))  # Tx-2 serves nobody
    with pytest.raises(ValueError):
        TreeNetwork({1: 0, 3: 1}, (1, 3))  # labels not 1..B
