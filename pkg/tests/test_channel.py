from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsbc.channel import (ChannelDraw, FadingDirtChannel, GaussianChannel, PowerMeter, PowerViolation,
                          apply_channel, channel_from_config, couple_same_marginals, draw_channel,
                          draw_channels, gaussian_apply, make_toy1, make_toy2,
                          normalize_observation, normalize_receivers, ToyChannel)
from nsbc.field import field_of_order, rank
from nsbc.minrank import FANO, random_pattern
from nsbc.topology import ConnectivityPattern, lower_triangular


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 4, 5, 8]), st.integers(1, 6), st.integers(1, 6),
       st.integers(0, 2**32 - 1))
def test_draws_fit_the_pattern(q, K, B, seed):
    rng = np.random.default_rng(seed)
    p = random_pattern(rng, K, B, 0.5)
    d = draw_channel(p, f"GF({q})", rng)
    assert np.array_equal(d.G != 0, p.stars)
    assert d.G.max() < q
    stack = draw_channels(p, f"GF({q})", rng, 7)
    assert stack.shape == (7, K, B)
    assert np.all((stack != 0) == p.stars)


def test_draw_is_read_only():
    d = draw_channel(FANO, "GF(3)", np.random.default_rng(0))
    with pytest.raises(ValueError):
        d.G[0, 0] = 2


def test_outputs_by_hand():
    F = field_of_order(3)
    d = ChannelDraw([[1, 0], [2, 1]], F)
    assert d.outputs([1, 2]).tolist() == [1, 1]  # 2*1 + 2 = 4 = 1
    obs = apply_channel(d, [1, 2])
    assert obs[1].g == (2, 1) and obs[1].y == 1
    with pytest.raises(ValueError):
        d.outputs([1, 2, 0])


def test_normalization():
    F = field_of_order(5)
    rng = np.random.default_rng(3)
    d = draw_channel(lower_triangular(4), F, rng)
    n = normalize_receivers(d)
    assert all(n.G[k, k] == 1 for k in range(4))
    x = F.random(rng, 4)
    for o in apply_channel(d, x):
        m = normalize_observation(o, F)
        assert m.g[o.k] == 1
        assert m.y == int(n.outputs(x)[o.k])


def test_coupled_copy_has_same_row_laws():
    # rows of G and of Gbar*diag(lambda) have identical laws, counted exactly over GF(3)
    p = ConnectivityPattern.from_rows(["**", "**"])
    F = field_of_order(3)
    rng = np.random.default_rng(11)
    gbar = np.array([[1, 2], [1, 1]])
    n = 6000
    rows_g, rows_c, ranks_g, ranks_c = {}, {}, [], []
    for _ in range(n):
        g, c = couple_same_marginals(p, F, rng, gbar=gbar)
        for k in range(2):
            rows_g[(k,) + tuple(g.G[k])] = rows_g.get((k,) + tuple(g.G[k]), 0) + 1
            rows_c[(k,) + tuple(c.G[k])] = rows_c.get((k,) + tuple(c.G[k]), 0) + 1
        ranks_g.append(rank(F, g.G))
        ranks_c.append(rank(F, c.G))
    assert set(rows_g) == set(rows_c)
    for key in rows_g:
        assert abs(rows_g[key] - rows_c[key]) < 0.1 * n / 4
    # the joint laws differ: the copy keeps gbar's rank
    assert set(ranks_c) == {2}
    assert 1 in ranks_g


def test_coupling_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        couple_same_marginals(lower_triangular(2), "GF(3)", rng, lam=[1, 0])
    with pytest.raises(ValueError):
        couple_same_marginals(lower_triangular(2), "GF(3)", rng, gbar=[[1, 1], [1, 1]])


def test_toy_channels():
    t1, t2 = make_toy1("GF(3)"), make_toy2("GF(3)")
    assert t1.outputs(1, 2, 2) == (1, (1, 2))
    assert t2.outputs(1, 2, 1) == ((1, 2), (0, 1))
    law = t1.transition(1, 1)
    assert law == {(1, (2, 1)): Fraction(1, 2), (1, (0, 2)): Fraction(1, 2)}
    assert make_toy1("GF(2)").degenerate and not t1.degenerate
    with pytest.raises(ValueError):
        ToyChannel(field_of_order(3), 3)


def test_fading_dirt_channel():
    ch = FadingDirtChannel(field_of_order(5))
    assert ch.output(3, 2, 4) == (1, 4)
    law = ch.transition(0)
    assert sum(law.values()) == 1
    # G = 0 leaves Y = X exactly
    assert law[(0, 0)] == Fraction(1, 5)


def test_power_meter_boundary():
    m = PowerMeter(P=1.0, n=2)
    m.charge([1.0, 0.0])
    m.charge([1.0, 0.0])  # exactly at the budget
    assert m.average_power == 1.0
    with pytest.raises(PowerViolation):
        m.charge([0.0, 0.0])  # session over
    m = PowerMeter(P=1.0, n=2)
    with pytest.raises(PowerViolation):
        m.charge([1.0, 1.01])
    m = PowerMeter(P=1.0, n=2, per_antenna=True)
    m.charge_block([[1.0, 1.0], [1.0, 1.0]])
    assert m.average_power == 2.0
    m = PowerMeter(P=1.0, n=2, per_antenna=True)
    with pytest.raises(PowerViolation):
        m.charge_block([[1.5, 0.0], [1.0, 0.0]])


def test_gaussian_channel():
    ch = GaussianChannel(lower_triangular(3), c=2.0)
    assert ch.f_max == pytest.approx(1 / 3)
    rng = np.random.default_rng(5)
    G = ch.draw_coefficients(rng, 500)
    mag = np.abs(G[:, lower_triangular(3).stars])
    assert mag.min() >= 0.5 and mag.max() <= 2.0
    assert np.all(G[:, ~lower_triangular(3).stars] == 0)
    u = GaussianChannel(lower_triangular(3), unit_diagonal=True).draw(rng, noise=False)
    assert np.all(np.diag(u.G) == 1.0)
    y = gaussian_apply(u, [1.0, 0.0, 0.0], 1.0)
    assert y.tolist() == [1.0, u.G[1, 0], u.G[2, 0]]
    with pytest.raises(PowerViolation):
        gaussian_apply(u, [2.0, 0.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        GaussianChannel(lower_triangular(2), c=1.0)


def test_channel_from_config():
    p, F = channel_from_config({"pattern": {"rows": ["*0", "**"]}, "field": "GF(7)"})
    assert F.q == 7 and p == lower_triangular(2)
    g = channel_from_config({"model": "gaussian", "pattern": lower_triangular(2), "c": 3})
    assert isinstance(g, GaussianChannel) and g.c == 3.0
    with pytest.raises(ValueError):
        channel_from_config({"model": "optical", "pattern": lower_triangular(2)})
