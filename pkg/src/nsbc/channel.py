"""Channel models over GF(q) and the real Gaussian CoMP channel."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .field import GF, parse_field
from .topology import ConnectivityPattern


@dataclass(frozen=True)
class ReceiverObservation:
    """What Rx-k gets from one channel use: its output and its CSIR row."""

    k: int
    y: int
    g: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ChannelDraw:
    """One channel use: a K x B coefficient matrix fitting the pattern."""

    G: np.ndarray
    field: GF
    tau: int = 0

    def __post_init__(self):
        G = np.array(self.G, dtype=np.int64)
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def K(self) -> int:
        return self.G.shape[0]

    @property
    def B(self) -> int:
        return self.G.shape[1]

    def outputs(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.B,):
            raise ValueError(f"input must have length {self.B}, got shape {x.shape}")
        return self.field.matvec(self.G, x)


def draw_channel(pattern: ConnectivityPattern, field: GF | str, rng: np.random.Generator,
                 tau: int = 0) -> ChannelDraw:
    """Fresh draw: star cells uniform on the nonzero elements, zero cells zero."""
    F = parse_field(field)
    G = F.random_nonzero(rng, pattern.stars.shape) * pattern.stars
    return ChannelDraw(G, F, tau)


def draw_channels(pattern: ConnectivityPattern, field: GF | str, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    """``n`` independent draws stacked as an (n, K, B) array."""
    F = parse_field(field)
    return F.random_nonzero(rng, (n,) + pattern.stars.shape) * pattern.stars


def apply_channel(draw: ChannelDraw, x) -> list[ReceiverObservation]:
    y = draw.outputs(x)
    rows = draw.G.tolist()
    return [ReceiverObservation(k, int(y[k]), tuple(rows[k])) for k in range(draw.K)]


def normalize_receivers(draw: ChannelDraw) -> ChannelDraw:
    """Scale row k by the inverse of G_kk so the diagonal becomes all ones."""
    F = draw.field
    K = min(draw.K, draw.B)
    diag = np.array([draw.G[k, k] for k in range(K)], dtype=np.int64)
    if np.any(diag == 0):
        k = int(np.flatnonzero(diag == 0)[0])
        raise ValueError(f"cannot normalize: G[{k},{k}] is zero")
    G = np.array(draw.G)
    G[:K] = F.scale_rows(G[:K], F.inv(diag))
    return ChannelDraw(G, F, draw.tau)


def normalize_observation(obs: ReceiverObservation, field: GF) -> ReceiverObservation:
    """Receiver-side normalisation: divide output and CSIR row by g_kk."""
    g_kk = obs.g[obs.k]
    if g_kk == 0:
        raise ValueError(f"Rx-{obs.k + 1} has a zero diagonal coefficient")
    s = field.inv(g_kk)
    return ReceiverObservation(obs.k, field.mul(obs.y, s), tuple(field.mul(v, s) for v in obs.g))


def couple_same_marginals(pattern: ConnectivityPattern, field: GF | str,
                          rng: np.random.Generator, lam: Sequence[int] | None = None,
                          gbar=None) -> tuple[ChannelDraw, ChannelDraw]:
    """An ordinary draw G and the coupled copy ``Gbar * diag(lambda)``.

    ``gbar`` is a fixed matrix fitting the pattern (default: the fresh draw
    itself) and lambda_b is uniform on the nonzero elements.  Row k of the
    copy has the same law as row k of G, while the joint law differs as soon
    as ``gbar`` is held fixed across draws (its rank never changes, say).
    """
    F = parse_field(field)
    draw = draw_channel(pattern, F, rng)
    lam = F.random_nonzero(rng, pattern.B) if lam is None else np.asarray(lam, dtype=np.int64)
    if lam.shape != (pattern.B,) or np.any(lam == 0):
        raise ValueError("lambda must be a length-B vector of nonzero elements")
    base = draw.G if gbar is None else np.asarray(gbar, dtype=np.int64)
    if base.shape != pattern.stars.shape or not np.array_equal(base != 0, pattern.stars):
        raise ValueError("gbar must fit the pattern")
    scaled = F.mul(base, lam[None, :])
    return draw, ChannelDraw(scaled, F, draw.tau)


# -- toy channels ----------------------------------------------------------


@dataclass(frozen=True)
class ToyChannel:
    """Two-user toy broadcast channels.

    Rx-2 always sees ``(G*X1 + X2, G)`` with G uniform on the nonzero
    elements.  In variant 1 Rx-1 sees X1; in variant 2 it sees ``(X1, X2)``.
    """

    field: GF
    variant: int

    input_names = ("X1", "X2")
    output_names = ("Y1", "Y2")

    def __post_init__(self):
        if self.variant not in (1, 2):
            raise ValueError("toy channel variant must be 1 or 2")

    @property
    def degenerate(self) -> bool:
        """Over GF(2) the coefficient G is the constant 1."""
        return self.field.q == 2

    def draw_g(self, rng: np.random.Generator) -> int:
        return int(rng.integers(1, self.field.q))

    def outputs(self, x1: int, x2: int, g: int):
        F = self.field
        y1 = x1 if self.variant == 1 else (x1, x2)
        return y1, (F.add(F.mul(g, x1), x2), g)

    def transition(self, x1: int, x2: int) -> dict[tuple, Fraction]:
        """Exact law of (Y1, Y2) given the inputs."""
        p = Fraction(1, self.field.q - 1)
        law: dict[tuple, Fraction] = {}
        for g in self.field.nonzero():
            out = self.outputs(x1, x2, g)
            law[out] = law.get(out, 0) + p
        return law


def make_toy1(field: GF | str) -> ToyChannel:
    return ToyChannel(parse_field(field), 1)


def make_toy2(field: GF | str) -> ToyChannel:
    return ToyChannel(parse_field(field), 2)


@dataclass(frozen=True)
class FadingDirtChannel:
    """Y = X + G*Theta with Theta, G uniform on GF(q); the receiver sees (Y, G).

    ``transition`` averages over an unknown state, which is the right law for
    schemes whose input does not depend on Theta.
    """

    field: GF

    input_names = ("X",)
    output_names = ("Y", "G")

    def output(self, x: int, theta: int, g: int) -> tuple[int, int]:
        F = self.field
        return F.add(x, F.mul(g, theta)), g

    def transition(self, x: int) -> dict[tuple, Fraction]:
        q = self.field.q
        p = Fraction(1, q * q)
        law: dict[tuple, Fraction] = {}
        for theta in range(q):
            for g in range(q):
                out = self.output(x, theta, g)
                law[out] = law.get(out, 0) + p
        return law


# -- Gaussian channel ----------------------------------------------------------


class PowerViolation(RuntimeError):
    pass


@dataclass
class PowerMeter:
    """Block-average power bookkeeping over a session of ``n`` channel uses.

    ``per_antenna`` enforces the budget on each antenna separately; otherwise
    the sum over antennas is charged.  Total energy is always recorded.
    """

    P: float
    n: int
    per_antenna: bool = False
    uses: int = 0
    energy: np.ndarray | float = 0.0
    total_energy: float = 0.0

    def charge(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if self.uses >= self.n:
            raise PowerViolation(f"session declared {self.n} uses")
        self.uses += 1
        sq = x * x
        self.total_energy += float(sq.sum())
        self.energy = self.energy + (sq if self.per_antenna else float(sq.sum()))
        # relative slack for float accumulation only
        if np.any(np.asarray(self.energy) > self.n * self.P * (1 + 1e-12)):
            raise PowerViolation(
                f"energy {np.max(self.energy):.6g} exceeds budget {self.n * self.P:.6g}")

    def charge_block(self, X) -> None:
        """Charge several uses at once; ``X`` is (uses, antennas)."""
        X = np.asarray(X, dtype=float)
        if self.uses + len(X) > self.n:
            raise PowerViolation(f"session declared {self.n} uses")
        sq = X * X
        self.uses += len(X)
        self.total_energy += float(sq.sum())
        self.energy = self.energy + (sq.sum(axis=0) if self.per_antenna else float(sq.sum()))
        if np.any(np.asarray(self.energy) > self.n * self.P * (1 + 1e-12)):
            raise PowerViolation(
                f"energy {np.max(self.energy):.6g} exceeds budget {self.n * self.P:.6g}")

    @property
    def average_power(self) -> float:
        return self.total_energy / max(self.uses, 1)


@dataclass(frozen=True, eq=False)
class GaussianDraw:
    G: np.ndarray
    z: np.ndarray
    c: float
    f_max: float


@dataclass(frozen=True)
class GaussianChannel:
    """Real CoMP channel ``y = G x + z`` with coefficients bounded in [1/c, c].

    Nonzero coefficients are uniform on ``[-c, -1/c] U [1/c, c]``.  With
    ``unit_diagonal`` the diagonal is fixed to 1, the receiver-normalised form.
    """

    pattern: ConnectivityPattern
    c: float = 2.0
    unit_diagonal: bool = False

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError("coefficient bound c must exceed 1")

    @property
    def f_max(self) -> float:
        return 1.0 / (2 * (self.c - 1 / self.c))

    def draw_coefficients(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """One (K, K) draw, or an (n, K, K) stack when ``n`` is given."""
        shape = self.pattern.stars.shape if n is None else (n,) + self.pattern.stars.shape
        mag = rng.uniform(1 / self.c, self.c, size=shape)
        sign = rng.choice((-1.0, 1.0), size=shape)
        G = mag * sign * self.pattern.stars
        if self.unit_diagonal:
            K = min(self.pattern.K, self.pattern.B)
            G[..., np.arange(K), np.arange(K)] = 1.0
        return G

    def draw(self, rng: np.random.Generator, noise: bool = True) -> GaussianDraw:
        G = self.draw_coefficients(rng)
        z = rng.standard_normal(self.pattern.K) if noise else np.zeros(self.pattern.K)
        return GaussianDraw(G, z, self.c, self.f_max)


def gaussian_apply(draw: GaussianDraw, x, meter: PowerMeter | float) -> np.ndarray:
    """``y = G x + z`` after charging ``x`` to the session's power meter.

    A bare number is treated as a one-use session with that power.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (draw.G.shape[1],):
        raise ValueError(f"input must have length {draw.G.shape[1]}")
    if not isinstance(meter, PowerMeter):
        meter = PowerMeter(float(meter), 1)
    meter.charge(x)
    return draw.G @ x + draw.z


def channel_from_config(cfg: dict):
    """Build a channel description from its JSON config."""
    model = cfg.get("model", "fq")
    pattern = cfg["pattern"]
    if not isinstance(pattern, ConnectivityPattern):
        pattern = ConnectivityPattern.from_json(pattern)
    if model == "fq":
        return pattern, parse_field(cfg["field"])
    if model == "gaussian":
        return GaussianChannel(pattern, float(cfg.get("c", 2.0)), bool(cfg.get("unit_diagonal", False)))
    raise ValueError(f"unknown channel model {model!r}")
