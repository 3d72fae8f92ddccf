"""Coding schemes, NS-assisted and classical, with per-user error accounting.

Encoders and decoders are separate functions.  An encoder never receives
channel state, and a decoder only ever gets its own receiver's observation
and its own box session.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .channel import (ChannelDraw, FadingDirtChannel, GaussianChannel, PowerMeter,
                      ReceiverObservation, ToyChannel, apply_channel, draw_channel,
                      normalize_observation)
from .field import GF, parse_field
from .infotools import JointPmf, entropy, mutual_information, pmf_from_scheme
from .minrank import find_triangle
from .nsbox import (RefereeSession, make_fading_dirt_box, make_gaussian_mod_box, make_mac_box,
                    make_otp_box, make_triangular_box, mod_size, referee_open)
from .topology import (ConnectivityPattern, NotATreeError, TreeNetwork, tdma_schedule,
                       tree_from_pattern)


class NotTriangularizableError(ValueError):
    pass


@dataclass
class SchemeRun:
    """Messages, decoded messages and per-user outcome of one scheme run."""

    messages: list
    decoded: list
    per_user_error: np.ndarray
    rate_bits: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.messages)

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rate_bits))


def _outcome(W, W_hat) -> np.ndarray:
    return np.array([not np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(W, W_hat)])


def _messages(F: GF, K: int, W, rng: np.random.Generator) -> list[int]:
    if W is None:
        return [int(v) for v in F.random(rng, K)]
    W = [int(v) for v in W]
    if len(W) != K or any(not 0 <= w < F.q for w in W):
        raise ValueError(f"need {K} messages in {F}")
    return W


# -- ordering ---------------------------------------------------------------------


def triangular_order(pattern: ConnectivityPattern) -> tuple[list[int], list[int]]:
    """Row and column orders that make the pattern lower-triangular with a star diagonal.

    Tree patterns with one receiver per antenna use the depth-first preorder
    of the antenna tree (children by ascending label).  Any other square
    pattern falls back to a full-size triangle found by the triangle search.
    """
    K, B = pattern.K, pattern.B
    if K != B:
        raise NotTriangularizableError(f"pattern is {K}x{B}; the NS schemes need K == B")
    S = pattern.stars
    if all(S[k, k] for k in range(K)) and not np.triu(S, 1).any():
        return list(range(K)), list(range(K))
    try:
        tree = tree_from_pattern(pattern)
    except NotATreeError:
        tree = None
    if tree is not None and len(set(tree.rx_assoc)) == K:
        cols = [b - 1 for b in tree.dfs_order()]
        rx_of = {b: k for k, b in enumerate(tree.rx_assoc)}
        return [rx_of[c + 1] for c in cols], cols
    tri = find_triangle(pattern)
    if len(tri) < K:
        raise NotTriangularizableError(
            f"largest triangular submatrix has size {len(tri)} < {K}")
    return [i for i, _ in tri], [j for _, j in tri]


def _frame(pattern: ConnectivityPattern, strict: bool):
    if strict:
        return triangular_order(pattern)
    if pattern.K != pattern.B or not all(pattern.stars[k, k] for k in range(pattern.K)):
        raise NotTriangularizableError("diagonal must be all stars")
    return list(range(pattern.K)), list(range(pattern.B))


def _local_view(obs: ReceiverObservation, i: int, cols: Sequence[int], field: GF) -> ReceiverObservation:
    """Receiver-side relabelling to the triangular frame, then normalisation."""
    g = tuple(obs.g[c] for c in cols)
    return normalize_observation(ReceiverObservation(i, obs.y, g), field)


# -- successive NS scheme -----------------------------------------------------------


def successive_encode(W: Sequence[int], field: GF, sessions: dict[int, RefereeSession]) -> list[int]:
    """X_1 = W_1; X_k = W_k - U_k where U_k comes from box k fed with X_1..X_{k-1}."""
    X = [W[0]]
    for k in range(1, len(W)):
        u = sessions[k].submit(0, tuple(X))
        X.append(field.sub(W[k], u))
    return X


def successive_decode(obs: ReceiverObservation, session: RefereeSession | None, field: GF) -> int:
    """Rx-k with a normalised observation: W_k = Y_k - V_k."""
    if obs.k == 0:
        return obs.y
    v = session.submit(1, obs.g[: obs.k])
    return field.sub(obs.y, v)


def ns_successive(pattern: ConnectivityPattern, field: GF | str, W=None,
                  rng: np.random.Generator | None = None, draw: ChannelDraw | None = None,
                  strict: bool = True) -> SchemeRun:
    """One-shot NS scheme with K - 1 bipartite inner-product boxes.

    ``W`` and ``draw`` use the pattern's own receiver/antenna labels.  With
    ``strict=False`` the pattern is used as given, and only a star diagonal
    is required.  The decoding then is only correct when the pattern is
    lower-triangular.
    """
    F = parse_field(field)
    rng = rng if rng is not None else np.random.default_rng()
    rows, cols = _frame(pattern, strict)
    K = pattern.K
    W = _messages(F, K, W, rng)
    sessions = {k: referee_open(make_otp_box(F, k + 1), rng) for k in range(1, K)}

    Xp = successive_encode([W[r] for r in rows], F, sessions)
    x = np.zeros(pattern.B, dtype=np.int64)
    x[cols] = Xp

    draw = draw if draw is not None else draw_channel(pattern, F, rng)
    obs = apply_channel(draw, x)
    W_hat = [0] * K
    for i, r in enumerate(rows):
        W_hat[r] = successive_decode(_local_view(obs[r], i, cols, F), sessions.get(i), F)
    return SchemeRun(W, W_hat, _outcome(W, W_hat), np.full(K, math.log2(F.q)))


def ns_multipartite(pattern: ConnectivityPattern, field: GF | str, W=None,
                    rng: np.random.Generator | None = None, draw: ChannelDraw | None = None,
                    strict: bool = True) -> SchemeRun:
    """One-shot NS scheme with a single (K+1)-party triangular box: W_k = V_k - Y_k."""
    F = parse_field(field)
    rng = rng if rng is not None else np.random.default_rng()
    rows, cols = _frame(pattern, strict)
    K = pattern.K
    W = _messages(F, K, W, rng)
    session = referee_open(make_triangular_box(F, K), rng)

    u = session.submit(0, tuple(W[r] for r in rows))
    x = np.zeros(pattern.B, dtype=np.int64)
    x[cols] = u

    draw = draw if draw is not None else draw_channel(pattern, F, rng)
    obs = apply_channel(draw, x)
    W_hat = [0] * K
    for i, r in enumerate(rows):
        local = _local_view(obs[r], i, cols, F)
        v = session.submit(i + 1, local.g[:i])
        W_hat[r] = F.sub(v, local.y)
    return SchemeRun(W, W_hat, _outcome(W, W_hat), np.full(K, math.log2(F.q)))


def naive_uncoded(pattern: ConnectivityPattern, field: GF | str, W=None,
                  rng: np.random.Generator | None = None, draw: ChannelDraw | None = None,
                  use_csir: bool = True) -> SchemeRun:
    """Classical baseline: antenna k sends W_k and Rx-k treats interference as absent.

    With CSIR the receiver divides by G_kk.  Without it the raw output is
    taken as the message, so errors depend on the coefficient values too.
    """
    F = parse_field(field)
    rng = rng if rng is not None else np.random.default_rng()
    _frame(pattern, strict=False)
    K = pattern.K
    W = _messages(F, K, W, rng)
    draw = draw if draw is not None else draw_channel(pattern, F, rng)
    obs = apply_channel(draw, np.array(W, dtype=np.int64))
    W_hat = [F.div(o.y, o.g[o.k]) if use_csir else o.y for o in obs]
    return SchemeRun(W, W_hat, _outcome(W, W_hat), np.full(K, math.log2(F.q)))


# -- TDMA --------------------------------------------------------------------------------


def tdma_slots(tree: TreeNetwork, d, n: int) -> dict[int, tuple[int, int]]:
    """Integer slots [start, stop) per receiver: floor(n d_k) uses each.

    An antenna's slot starts where its parent's ends.  Along any root path
    the slot lengths sum to at most floor(n * path DoF) <= n.
    """
    tdma_schedule(tree, d)  # raises on region violation
    counts = [int(math.floor(n * float(dk) + 1e-9)) for dk in d]
    ant_end = {0: 0}
    slots = {}
    for b in tree.dfs_order():
        t = ant_end[tree.parent[b]]
        for k in tree.receivers_of(b):
            slots[k] = (t, t + counts[k])
            t += counts[k]
        ant_end[b] = t
    if max(ant_end.values()) > n:
        raise ValueError("quantised schedule overflows the block; DoF too close to the boundary")
    return slots


def classical_tdma(tree: TreeNetwork, d, field: GF | str, n: int, W=None,
                   rng: np.random.Generator | None = None) -> SchemeRun:
    """Uncoded TDMA following the tree schedule.

    ``W[k]`` is the vector of floor(n d_k) symbols for Rx-k.  In its slot the
    associated antenna sends them one per use, and the receiver inverts the
    only nonzero coefficient it sees at that time.
    """
    F = parse_field(field)
    rng = rng if rng is not None else np.random.default_rng()
    if n < 1:
        raise ValueError("n must be >= 1")
    slots = tdma_slots(tree, d, n)
    K, B = tree.K, tree.B
    lengths = [slots[k][1] - slots[k][0] for k in range(K)]
    if W is None:
        W = [F.random(rng, L) for L in lengths]
    W = [np.asarray(w, dtype=np.int64) for w in W]
    if [len(w) for w in W] != lengths:
        raise ValueError(f"message lengths must be {lengths}")

    pattern = tree.pattern()
    G = F.random_nonzero(rng, (n, K, B)) * pattern.stars
    X = np.zeros((n, B), dtype=np.int64)
    for k in range(K):
        s, e = slots[k]
        X[s:e, tree.rx_assoc[k] - 1] = W[k]
    Y = F.matvec(G, X)

    W_hat = []
    for k in range(K):
        s, e = slots[k]
        b = tree.rx_assoc[k] - 1
        W_hat.append(F.div(Y[s:e, k], G[s:e, k, b]) if e > s else np.zeros(0, dtype=np.int64))
    rates = np.array(lengths) * math.log2(F.q) / n
    return SchemeRun(W, W_hat, _outcome(W, W_hat), rates, {"slots": slots})


# -- toy channels -----------------------------------------------------------------------


@dataclass
class ToyCertificate:
    """Exact information quantities certifying a classical rate point."""

    channel: str
    field: str
    values: dict[str, float]
    targets: dict[str, float]

    def check(self, tol: float = 1e-9) -> bool:
        return all(abs(self.values[k] - v) <= tol for k, v in self.targets.items())

    def to_json(self) -> dict:
        return {"channel": self.channel, "field": self.field,
                "rows": [{"quantity": k, "value": self.values[k], "target": self.targets.get(k),
                          "ok": (abs(self.values[k] - self.targets[k]) <= 1e-9
                                 if k in self.targets else None)} for k in self.values]}


def toy_scheme_pmf(channel: ToyChannel) -> JointPmf:
    """Joint law of (W1, W2, U, X1, X2, Y1, Y2) for (X1, X2, U) = (W1, W2 - W1, W2)."""
    F = channel.field
    base = JointPmf.uniform(("W1", "W2"), (range(F.q), range(F.q)))
    base = base.extend("U", lambda w2: w2, ("W2",))
    base = base.extend("X1", lambda w1: w1, ("W1",))
    base = base.extend("X2", lambda w1, w2: F.sub(w2, w1), ("W1", "W2"))
    return pmf_from_scheme(channel, base)


def classical_toy_certificate(channel: ToyChannel) -> ToyCertificate:
    """Superposition point (H(Y1|U), I(U;Y2)) of the scheme X1=W1, X2=W2-W1, U=W2."""
    p = toy_scheme_pmf(channel)
    q = channel.field.q
    lq = math.log2(q)
    values = {
        "I(U;Y2)": mutual_information(p, "U", "Y2"),
        "H(Y1|U)": entropy(p, "Y1", "U"),
        "H(Y1|X1,X2)": entropy(p, "Y1", ("X1", "X2")),
    }
    values["R1+R2"] = values["I(U;Y2)"] + values["H(Y1|U)"]
    targets = {"H(Y1|U)": lq, "H(Y1|X1,X2)": 0.0}
    if q == 3:
        targets.update({"I(U;Y2)": 0.5 * lq, "R1+R2": 1.5 * lq})
    if q == 2:
        # G is the constant 1, so Rx-2 reads W2 directly
        targets.update({"I(U;Y2)": 1.0, "R1+R2": 2.0})
    return ToyCertificate(f"toy{channel.variant}", channel.field.name, values, targets)


def classical_toy1_f3() -> ToyCertificate:
    from .channel import make_toy1
    return classical_toy_certificate(make_toy1("GF(3)"))


def ns_toy(channel: ToyChannel, W=None, rng: np.random.Generator | None = None,
           g: int | None = None) -> SchemeRun:
    """NS scheme on a toy channel: both users at log2 q with zero error."""
    F = channel.field
    rng = rng if rng is not None else np.random.default_rng()
    W = _messages(F, 2, W, rng)
    session = referee_open(make_otp_box(F, 2), rng)
    x1 = W[0]
    x2 = F.sub(W[1], session.submit(0, (x1,)))
    g = channel.draw_g(rng) if g is None else g
    y1, (y2, g_seen) = channel.outputs(x1, x2, g)
    w1 = y1 if channel.variant == 1 else y1[0]
    w2 = F.sub(y2, session.submit(1, (g_seen,)))
    W_hat = [w1, w2]
    return SchemeRun(W, W_hat, _outcome(W, W_hat), np.full(2, math.log2(F.q)))


# -- fading dirty paper -------------------------------------------------------------------


def fading_dirt_encode(w: int, theta: int, session: RefereeSession, field: GF) -> int:
    return field.add(w, session.submit(0, theta))


def fading_dirt_decode(y: int, g: int, session: RefereeSession, field: GF) -> int:
    return field.sub(y, session.submit(1, g))


def fading_dirt_ns(field: GF | str, W=None, theta=None, g=None,
                   rng: np.random.Generator | None = None) -> SchemeRun:
    """Y = X + G*Theta with Theta at the Tx and G at the Rx: X = W + U, W = Y - V."""
    F = parse_field(field)
    rng = rng if rng is not None else np.random.default_rng()
    w = int(F.random(rng)) if W is None else int(W)
    theta = int(F.random(rng)) if theta is None else int(theta)
    g = int(F.random(rng)) if g is None else int(g)
    session = referee_open(make_fading_dirt_box(F), rng)
    x = fading_dirt_encode(w, theta, session, F)
    y, g_seen = FadingDirtChannel(F).output(x, theta, g)
    w_hat = fading_dirt_decode(y, g_seen, session, F)
    return SchemeRun([w], [w_hat], _outcome([w], [w_hat]), np.array([math.log2(F.q)]))


def fading_dirt_classical_baseline(field: GF | str) -> float:
    """I(X; Y | G) in bits for uniform X independent of the state."""
    F = parse_field(field)
    p = pmf_from_scheme(FadingDirtChannel(F), JointPmf.uniform(("X",), (range(F.q),)))
    return mutual_information(p, "X", "Y", "G")


# -- MAC with state ------------------------------------------------------------------------


class ConvertedMac:
    """State-dependent adder MAC wrapped by the (K+1)-party box.

    The raw channel is ``Y = X_1 + ... + X_K + f(Theta_0, ..., Theta_K) + Z``.
    Tx-k sends ``X_k = Xbar_k + U_k`` and the receiver outputs
    ``Ybar = Y - V``, which leaves ``Xbar_1 + ... + Xbar_K + Z``.
    """

    def __init__(self, field: GF | str, K: int, f: Callable[..., int]):
        self.field = parse_field(field)
        self.K = K
        self.f = f
        self.box = make_mac_box(self.field, K, f)

    def raw_output(self, x: Sequence[int], states: Sequence, z: int) -> int:
        F = self.field
        acc = self.box.g(tuple(states[1:]) + (states[0],))  # validates f's codomain
        for v in x:
            acc = F.add(acc, v)
        return F.add(acc, z)

    def use(self, xbar: Sequence[int], states: Sequence, z: int,
            rng: np.random.Generator) -> int:
        """One converted use.  ``states`` is (Theta_0, Theta_1, ..., Theta_K)."""
        F = self.field
        session = referee_open(self.box, rng)
        x = [F.add(xb, session.submit(k, states[k + 1])) for k, xb in enumerate(xbar)]
        y = self.raw_output(x, states, z)
        return F.sub(y, session.submit(self.K, states[0]))

    def law(self, xbar: Sequence[int], state_law: dict[tuple, Fraction],
            noise_law: dict[int, Fraction]) -> dict[int, Fraction]:
        """Exact law of Ybar given Xbar, by enumerating states, box outputs and noise."""
        F = self.field
        out: dict[int, Fraction] = {}
        for states, ps in state_law.items():
            box_in = tuple(states[1:]) + (states[0],)
            for outs, pb in self.box.conditional(box_in).items():
                x = [F.add(xb, u) for xb, u in zip(xbar, outs[:-1])]
                for z, pz in noise_law.items():
                    ybar = F.sub(self.raw_output(x, states, z), outs[-1])
                    out[ybar] = out.get(ybar, 0) + ps * pb * pz
        return out


def interference_free_law(field: GF, xbar: Sequence[int], noise_law: dict[int, Fraction]) -> dict[int, Fraction]:
    s = 0
    for v in xbar:
        s = field.add(s, v)
    out: dict[int, Fraction] = {}
    for z, pz in noise_law.items():
        y = field.add(s, z)
        out[y] = out.get(y, 0) + pz
    return out


def total_variation(p: dict, q: dict) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(Fraction(p.get(k, 0)) - Fraction(q.get(k, 0))) for k in keys), Fraction(0)) / 2


class MacTdmaInner:
    """Inner scheme for the interference-free adder MAC: user k alone in use k."""

    def __init__(self, field: GF, K: int):
        self.field, self.K, self.n = field, K, K

    def encode(self, W: Sequence[int]) -> list[list[int]]:
        return [[W[k] if k == t else 0 for k in range(self.K)] for t in range(self.n)]

    def decode(self, ybars: Sequence[int]) -> list[int]:
        return list(ybars)


def mac_convert(field: GF | str, K: int, f: Callable[..., int], inner=None, W=None,
                states=None, noise: Callable[[np.random.Generator], int] | None = None,
                rng: np.random.Generator | None = None) -> SchemeRun:
    """Run ``inner`` unchanged over the converted MAC.

    ``inner`` offers ``n``, ``encode(W) -> n input tuples`` and
    ``decode(outputs) -> W_hat``.  ``states`` is a length-n list of
    (Theta_0, ..., Theta_K) tuples and defaults to uniform field elements.
    ``noise`` draws Z per use and defaults to Z = 0.
    """
    F = parse_field(field)
    rng = rng if rng is not None else np.random.default_rng()
    conv = ConvertedMac(F, K, f)
    inner = inner if inner is not None else MacTdmaInner(F, K)
    W = _messages(F, K, W, rng)
    xs = inner.encode(W)
    if states is None:
        states = [tuple(int(v) for v in F.random(rng, K + 1)) for _ in range(inner.n)]
    ybars = []
    for t, xbar in enumerate(xs):
        z = 0 if noise is None else int(noise(rng))
        ybars.append(conv.use(xbar, states[t], z, rng))
    W_hat = inner.decode(ybars)
    return SchemeRun(W, W_hat, _outcome(W, W_hat), np.full(K, math.log2(F.q) / inner.n),
                     {"outputs": ybars})


# -- Gaussian conversion ---------------------------------------------------------------------


def _wrap(x, M):
    """Representative of x mod M in [-M/2, M/2)."""
    return np.mod(x + M / 2, M) - M / 2


def gaussian_convert(network: TreeNetwork | ConnectivityPattern | int, P: float, n: int,
                     W=None, rng: np.random.Generator | None = None, noise: bool = True,
                     c: float = 2.0, decoder: str = "floor") -> SchemeRun:
    """Turn the real triangular channel into K parallel mod-ceil(sqrt P) channels.

    ``network`` is a path/triangular network (an int means the K-user path).
    The channel is drawn with unit diagonal, which is the receiver-normalised
    form, and off-diagonal stars bounded in [1/c, c].  ``W`` is an (n, K)
    array of integers in [0, ceil(sqrt P)).  Decoders: ``floor`` (exact when
    Z = 0) or ``nearest`` (nearest integer with wraparound, ties downward).
    """
    rng = rng if rng is not None else np.random.default_rng()
    if isinstance(network, int):
        pattern = ConnectivityPattern(np.tril(np.ones((network, network), dtype=bool)))
    elif isinstance(network, TreeNetwork):
        pattern = network.pattern()
    else:
        pattern = network
    rows, cols = triangular_order(pattern)
    tri_pattern = pattern.permute(rows, cols)
    K = pattern.K
    M = mod_size(P)
    if W is None:
        W = rng.integers(0, M, size=(n, K))
    W = np.asarray(W, dtype=np.int64)
    if W.shape != (n, K):
        raise ValueError(f"messages must have shape {(n, K)}")
    if np.any((W < 0) | (W >= M)):
        raise ValueError(f"messages must lie in 0..{M - 1}")
    Wp = W[:, rows]

    chan = GaussianChannel(tri_pattern, c, unit_diagonal=True)
    G = chan.draw_coefficients(rng, n)
    Z = rng.standard_normal((n, K)) if noise else np.zeros((n, K))

    # encoder: X_1 = Xbar_1, X_k = (Xbar_k - U_k) mod M with U_k from box k
    X = np.zeros((n, K), dtype=np.int64)
    X[:, 0] = Wp[:, 0]
    V = np.zeros((n, K), dtype=np.int64)
    S = np.zeros((n, K))  # interference seen by each receiver
    for k in range(1, K):
        box = make_gaussian_mod_box(P, k + 1)
        S[:, k] = np.einsum("nj,nj->n", X[:, :k].astype(float), G[:, k, :k])
        uv = box.sample_batch(np.floor(S[:, k]).astype(np.int64) % M, rng)
        X[:, k] = np.mod(Wp[:, k] - uv[:, 0], M)
        V[:, k] = uv[:, 1]
    Ztilde = S - np.floor(S)

    meter = PowerMeter(P, n, per_antenna=True)
    meter.charge_block(X)

    # unit diagonal, so Y_k = X_k + interference + Z_k
    Y = X + S + Z
    Ybar = np.mod(Y - V, M)
    if decoder == "floor":
        W_hat = np.mod(np.floor(Ybar), M).astype(np.int64)
    elif decoder == "nearest":
        W_hat = np.mod(np.ceil(Ybar - 0.5), M).astype(np.int64)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")

    resid = _wrap(Ybar - Wp, M)
    floor_hat = np.mod(np.floor(Ybar), M)
    near_hat = np.mod(np.ceil(Ybar - 0.5), M)
    out = np.empty_like(W_hat)
    out[:, rows] = W_hat
    diagnostics = {
        "modulus": M,
        "var_zbar": resid.var(axis=0)[np.argsort(rows)].tolist(),
        "var_zbar_true": (Z + Ztilde).var(axis=0)[np.argsort(rows)].tolist(),
        "ztilde_range": (float(Ztilde.min()), float(Ztilde.max())),
        "per_antenna_power": (np.mean(X.astype(float) ** 2, axis=0)).tolist(),
        "average_total_power": meter.average_power,
        "ser_floor": float(np.mean(floor_hat != Wp)),
        "ser_nearest": float(np.mean(near_hat != Wp)),
        "dof_ratio": math.log2(M) / (0.5 * math.log2(P)),
    }
    per_user = np.array([np.any(out[:, k] != W[:, k]) for k in range(K)])
    rates = np.full(K, math.log2(M))
    return SchemeRun(list(W.T), list(out.T), per_user, rates, diagnostics)
