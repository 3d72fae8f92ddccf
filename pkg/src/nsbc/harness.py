"""Reproducible experiment runs: seeding, trial batching and result records.

Trial ``i`` of an experiment with master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(i,)))``, so any single trial can be
replayed on its own with :func:`trial_rng`.  Trials are folded in index
order, which makes the record independent of how trials were split across
worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import __version__
from .channel import couple_same_marginals, make_toy1, make_toy2
from .field import GF, parse_field
from .schemes import (SchemeRun, classical_tdma, fading_dirt_ns, gaussian_convert, mac_convert,
                      naive_uncoded, ns_multipartite, ns_successive, ns_toy, triangular_order)
from .topology import (ConnectivityPattern, NotATreeError, TreeNetwork, classical_region_contains,
                       fully_connected, lower_triangular, tree_from_pattern)

SCHEMA_VERSION = "nsbc.record/1"


class ConfigError(ValueError):
    """Bad experiment configuration.  ``usage`` marks missing or malformed
    parameters, as opposed to well-formed but infeasible combinations."""

    def __init__(self, message: str, usage: bool = False):
        super().__init__(message)
        self.usage = usage


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def worker_count() -> int:
    raw = os.environ.get("NSBC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"NSBC_THREADS must be an integer, got {raw!r}", usage=True) from None


# -- exhaustive enumeration through a scripted generator ------------------------------


class ScriptedRng:
    """Stand-in for ``np.random.Generator`` that replays scripted choices.

    Only ``integers`` is supported.  Every scalar drawn is one branch point
    with a uniform law over ``[low, high)``.
    """

    def __init__(self, script: list[int]):
        self.script = script
        self.arities: list[int] = []
        self.pos = 0

    def _one(self, low: int, high: int) -> int:
        if self.pos == len(self.script):
            self.script.append(0)
        v = self.script[self.pos]
        self.arities.append(high - low)
        self.pos += 1
        return low + v

    def integers(self, low, high=None, size=None, dtype=np.int64, endpoint=False):
        if high is None:
            low, high = 0, low
        low, high = int(low), int(high) + (1 if endpoint else 0)
        if size is None:
            return dtype(self._one(low, high)) if dtype is not int else self._one(low, high)
        shape = (size,) if np.isscalar(size) else tuple(size)
        vals = [self._one(low, high) for _ in range(int(np.prod(shape, dtype=np.int64)))]
        return np.array(vals, dtype=dtype).reshape(shape)

    def __getattr__(self, name):
        raise TypeError(f"scripted generator does not support {name}()")


def enumerate_outcomes(fn: Callable[[ScriptedRng], Any], limit: int = 10**6
                       ) -> list[tuple[Fraction, Any]]:
    """Run ``fn`` once per branch of its random choices; returns (probability, result)."""
    out = []
    script: list[int] = []
    while True:
        rng = ScriptedRng(script)
        result = fn(rng)
        del script[rng.pos:]
        prob = Fraction(1)
        for a in rng.arities:
            prob /= a
        out.append((prob, result))
        if len(out) > limit:
            raise ConfigError(f"more than {limit} branches")
        # odometer step over the recorded choices
        while script and script[-1] + 1 == rng.arities[len(script) - 1]:
            script.pop()
        if not script:
            return out
        script[-1] += 1


# -- configuration ------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything a run depends on.  ``out`` and ``csv`` only say where to write."""

    scheme: str
    channel: dict = field(default_factory=dict)
    field: str | None = None
    power: float | None = None
    trials: int = 1
    seed: int = 0
    n: int = 1
    d: list[float] | None = None
    decoder: str = "floor"
    out: str | None = None
    csv: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1", usage=True)
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}", usage=True)

    def identity(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("csv")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_json(cls, data: dict | str) -> "ExperimentConfig":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(**data)


def pattern_from_channel(ch: dict) -> ConnectivityPattern:
    """``{"pattern": rows}``, ``{"tree": {...}}``, or ``{"network": "path"|"full", "K": k}``."""
    if "pattern" in ch:
        p = ch["pattern"]
        return ConnectivityPattern.from_rows(p) if isinstance(p, list) else ConnectivityPattern.from_json(p)
    if "tree" in ch:
        return TreeNetwork.from_json(ch["tree"]).pattern()
    kind = ch.get("network")
    if kind == "path":
        return lower_triangular(int(ch["K"]))
    if kind == "full":
        return fully_connected(int(ch["K"]), int(ch.get("B", ch["K"])))
    raise ConfigError(f"cannot build a pattern from channel config {ch!r}", usage=True)


def tree_from_channel(ch: dict) -> TreeNetwork:
    if "tree" in ch:
        return TreeNetwork.from_json(ch["tree"])
    try:
        return tree_from_pattern(pattern_from_channel(ch))
    except NotATreeError as e:
        raise ConfigError(f"TDMA needs a tree network: {e}") from e


def _need_field(cfg: ExperimentConfig) -> GF:
    if cfg.field is None:
        raise ConfigError(f"scheme {cfg.scheme} needs a field", usage=True)
    return parse_field(cfg.field)


def _mac_f(name: str, q: int):
    fns = {"sum": lambda t, *s: (t + sum(s)) % q,
           "product": lambda t, *s: int(np.prod([t, *s], dtype=object)) % q,
           "zero": lambda t, *s: 0}
    if name not in fns:
        raise ConfigError(f"unknown interference function {name!r}", usage=True)
    return fns[name]


def _prepare(cfg: ExperimentConfig) -> Callable[[np.random.Generator], SchemeRun]:
    """Validate once and return the per-trial runner."""
    s, ch = cfg.scheme, cfg.channel
    if s in ("ns-successive", "ns-multipartite", "naive", "naive-blind"):
        F = _need_field(cfg)
        pattern = pattern_from_channel(ch)
        strict = bool(ch.get("strict", True))
        if s.startswith("naive"):
            return lambda rng: naive_uncoded(pattern, F, rng=rng, use_csir=s == "naive")
        fn = ns_successive if s == "ns-successive" else ns_multipartite
        if strict:
            try:
                triangular_order(pattern)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        return lambda rng: fn(pattern, F, rng=rng, strict=strict)
    if s == "tdma":
        F = _need_field(cfg)
        tree = tree_from_channel(ch)
        if cfg.d is None or len(cfg.d) != tree.K:
            raise ConfigError(f"tdma needs a DoF tuple of length {tree.K}", usage=True)
        if not classical_region_contains(tree, cfg.d):
            raise ConfigError("DoF tuple outside the classical region")
        return lambda rng: classical_tdma(tree, cfg.d, F, cfg.n, rng=rng)
    if s == "fading-dirt":
        F = _need_field(cfg)
        return lambda rng: fading_dirt_ns(F, rng=rng)
    if s in ("ns-toy1", "ns-toy2"):
        chan = (make_toy1 if s == "ns-toy1" else make_toy2)(_need_field(cfg))
        return lambda rng: ns_toy(chan, rng=rng)
    if s == "mac-convert":
        F = _need_field(cfg)
        K = int(ch.get("K", 2))
        f = _mac_f(ch.get("f", "sum"), F.q)
        return lambda rng: mac_convert(F, K, f, rng=rng)
    if s == "gaussian":
        if cfg.power is None:
            raise ConfigError("gaussian scheme needs a power", usage=True)
        pattern = pattern_from_channel(ch)
        c = float(ch.get("c", 2.0))
        noise = bool(ch.get("noise", True))
        return lambda rng: gaussian_convert(pattern, cfg.power, cfg.n, rng=rng, noise=noise,
                                            c=c, decoder=cfg.decoder)
    raise ConfigError(f"unknown scheme {s!r}", usage=True)


SCHEMES = ("ns-successive", "ns-multipartite", "naive", "naive-blind", "tdma", "fading-dirt", "ns-toy1",
           "ns-toy2", "mac-convert", "gaussian")


# -- running -------------------------------------------------------------------------


@dataclass
class ExperimentRecord:
    config_hash: str
    config: dict
    trials: int
    error_counts: list[int]
    rate_bits: list[float]
    wall_time: float = 0.0
    version: str = __version__
    schema: str = SCHEMA_VERSION

    def to_json(self, include_wall_time: bool = False) -> dict:
        d = asdict(self)
        if not include_wall_time:
            d.pop("wall_time")
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def _run_block(cfg: ExperimentConfig, start: int, stop: int, keep_rows: bool):
    runner = _prepare(cfg)
    errors = None
    rates = []
    rows = []
    for i in range(start, stop):
        run = runner(trial_rng(cfg.seed, i))
        e = np.asarray(run.per_user_error, dtype=np.int64)
        errors = e if errors is None else errors + e
        rates.append(np.asarray(run.rate_bits, dtype=float))
        if keep_rows:
            rows.append([i, *e.tolist()])
    return errors, np.array(rates), rows


def _blocks(trials: int, workers: int) -> list[tuple[int, int]]:
    size = -(-trials // workers)
    return [(a, min(a + size, trials)) for a in range(0, trials, size)]


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentRecord:
    """Run all trials, fold the counts and write ``cfg.out`` / ``cfg.csv`` if set."""
    _prepare(cfg)  # fail fast on bad combinations
    workers = worker_count() if workers is None else max(1, workers)
    keep = cfg.csv is not None
    t0 = time.perf_counter()
    blocks = _blocks(cfg.trials, min(workers, cfg.trials))
    if len(blocks) == 1:
        parts = [_run_block(cfg, *blocks[0], keep)]
    else:
        with ProcessPoolExecutor(len(blocks)) as pool:
            parts = list(pool.map(_run_block, [cfg] * len(blocks), *zip(*blocks),
                                  [keep] * len(blocks)))
    errors = sum(p[0] for p in parts)
    # fsum is correctly rounded, so the mean does not depend on the block split
    per_trial = np.concatenate([p[1] for p in parts])
    rates = [math.fsum(col) / cfg.trials for col in per_trial.T]
    rec = ExperimentRecord(cfg.hash(), cfg.identity(), cfg.trials,
                           [int(v) for v in errors], [float(v) for v in rates],
                           time.perf_counter() - t0)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(rec.dumps())
    if keep:
        with open(cfg.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial"] + [f"error_{k + 1}" for k in range(len(errors))])
            for p in parts:
                w.writerows(p[2])
    return rec


# -- same-marginals comparison -------------------------------------------------------------


@dataclass
class PairedRecord:
    """Per-user error rates of one scheme on a channel and on its coupled copy."""

    mode: str
    samples: int
    error_original: list
    error_coupled: list
    difference: list
    sigma: list
    config_hash: str = ""

    @property
    def within_band(self) -> bool:
        return all(abs(float(d)) <= 3 * s for d, s in zip(self.difference, self.sigma))

    @property
    def exact_match(self) -> bool:
        return all(d == 0 for d in self.difference)

    def to_json(self) -> dict:
        conv = (lambda v: str(v)) if self.mode == "exhaustive" else float
        return {"mode": self.mode, "samples": self.samples,
                "error_original": [conv(v) for v in self.error_original],
                "error_coupled": [conv(v) for v in self.error_coupled],
                "difference": [conv(v) for v in self.difference],
                "sigma": self.sigma, "within_3sigma": self.within_band,
                "config_hash": self.config_hash, "schema": SCHEMA_VERSION}


_BC_SCHEMES = {
    "ns-successive": lambda p, F, rng, draw: ns_successive(p, F, rng=rng, draw=draw, strict=False),
    "ns-multipartite": lambda p, F, rng, draw: ns_multipartite(p, F, rng=rng, draw=draw, strict=False),
    "naive": lambda p, F, rng, draw: naive_uncoded(p, F, rng=rng, draw=draw),
    "naive-blind": lambda p, F, rng, draw: naive_uncoded(p, F, rng=rng, draw=draw, use_csir=False),
}


def _coupling_setup(cfg: ExperimentConfig, gbar):
    if cfg.scheme not in _BC_SCHEMES:
        raise ConfigError(f"same-marginals comparison supports {sorted(_BC_SCHEMES)}", usage=True)
    F = _need_field(cfg)
    pattern = pattern_from_channel(cfg.channel)
    # default fixed matrix: all ones on the stars, rank as low as it gets.
    # "draw" scales the fresh draw itself instead
    if isinstance(gbar, str):
        if gbar != "draw":
            raise ConfigError(f"gbar must be a matrix or 'draw', got {gbar!r}", usage=True)
        gbar = None
    else:
        gbar = pattern.stars.astype(np.int64) if gbar is None else np.asarray(gbar, dtype=np.int64)
    return _BC_SCHEMES[cfg.scheme], F, pattern, gbar


def compare_same_marginals(cfg: ExperimentConfig, mode: str = "mc", gbar=None,
                           lam=None) -> PairedRecord:
    """Run one scheme against G and against the coupled Gbar * diag(lambda).

    ``mode="exhaustive"`` sums exact probabilities over every message,
    channel, lambda and box outcome.  ``mode="mc"`` gives each trial two
    substreams: the channel stream draws G and lambda, and the scheme stream
    is replayed identically for both channels, so messages and box
    randomness are shared.  ``lam`` fixes lambda instead of drawing it, and
    ``gbar="draw"`` couples each draw to a scaled copy of itself.
    """
    gbar_arg = gbar
    scheme, F, pattern, gbar = _coupling_setup(cfg, gbar)
    K = pattern.K
    lam = None if lam is None else np.asarray(lam, dtype=np.int64)

    def pair(rng):
        return couple_same_marginals(pattern, F, rng, lam=lam, gbar=gbar)

    if mode == "exhaustive":
        # each side enumerates the full pair, so both see identical branch weights
        def orig(rng):
            return scheme(pattern, F, rng, pair(rng)[0]).per_user_error

        def coupled(rng):
            return scheme(pattern, F, rng, pair(rng)[1]).per_user_error

        p0 = [Fraction(0)] * K
        p1 = [Fraction(0)] * K
        out0 = enumerate_outcomes(orig)
        out1 = enumerate_outcomes(coupled)
        for prob, e in out0:
            for k in range(K):
                p0[k] += prob * bool(e[k])
        for prob, e in out1:
            for k in range(K):
                p1[k] += prob * bool(e[k])
        diff = [a - b for a, b in zip(p0, p1)]
        return PairedRecord("exhaustive", len(out0) + len(out1), p0, p1, diff, [0.0] * K,
                            cfg.hash())
    if mode != "mc":
        raise ConfigError(f"unknown comparison mode {mode!r}", usage=True)

    workers = min(worker_count(), cfg.trials)
    blocks = _blocks(cfg.trials, workers)
    args = ([cfg] * len(blocks), [a for a, _ in blocks], [b for _, b in blocks],
            [gbar_arg] * len(blocks), [lam] * len(blocks))
    if len(blocks) == 1:
        parts = [_mc_block(*(x[0] for x in args))]
    else:
        with ProcessPoolExecutor(len(blocks)) as pool:
            parts = list(pool.map(_mc_block, *args))
    # integer sums, so the fold is exact in any order
    e0, e1, s1, s2 = (sum(p[i] for p in parts) for i in range(4))
    n = cfg.trials
    mean = s1 / n
    var = (s2 - n * mean ** 2) / (n - 1) if n > 1 else np.zeros(K)
    sigma = np.sqrt(np.maximum(var, 0) / n).tolist()
    return PairedRecord("mc", n, (e0 / n).tolist(), (e1 / n).tolist(), mean.tolist(), sigma,
                        cfg.hash())


def _mc_block(cfg: ExperimentConfig, start: int, stop: int, gbar, lam):
    scheme, F, pattern, gbar = _coupling_setup(cfg, gbar)
    e0 = np.zeros(pattern.K, dtype=np.int64)
    e1 = np.zeros(pattern.K, dtype=np.int64)
    s2 = np.zeros(pattern.K, dtype=np.int64)
    for i in range(start, stop):
        chan_ss, scheme_ss = np.random.SeedSequence(cfg.seed, spawn_key=(i,)).spawn(2)
        draw, cdraw = couple_same_marginals(pattern, F, np.random.Generator(np.random.PCG64(chan_ss)),
                                            lam=lam, gbar=gbar)
        a = scheme(pattern, F, np.random.Generator(np.random.PCG64(scheme_ss)), draw).per_user_error
        b = scheme(pattern, F, np.random.Generator(np.random.PCG64(scheme_ss)), cdraw).per_user_error
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        e0 += a
        e1 += b
        s2 += (a - b) ** 2
    return e0, e1, e0 - e1, s2
