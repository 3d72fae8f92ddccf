"""The acceptance matrix: eleven desk-scale checks, each reporting pass/fail.

Every check returns a :class:`CriterionResult` whose ``detail`` carries the
measured numbers, so a failing line can be diagnosed from the report alone.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .channel import PowerViolation, make_toy1, make_toy2
from .field import parse_field
from .harness import ExperimentConfig, compare_same_marginals, run_experiment
from .minrank import (FANO, fitting_rank, minrank_bruteforce, minrank_search, random_pattern,
                      triangle_number)
from .nsbox import (make_fading_dirt_box, make_leak_box, make_mac_box, make_otp_box,
                    make_triangular_box, verify_nonsignaling)
from .schemes import (ConvertedMac, classical_tdma, classical_toy_certificate,
                      fading_dirt_classical_baseline, gaussian_convert, interference_free_law,
                      ns_successive, ns_toy, total_variation)
from .topology import (TreeNetwork, leaf_saturating_dof, lower_triangular, random_tree,
                       tdma_schedule, tree_from_pattern)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number:>2} {'PASS' if self.passed else 'FAIL'}  {self.name}"

    def to_json(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": self.passed,
                "seconds": round(self.seconds, 3), "detail": self.detail}


def _timed(limit: float | None):
    def wrap(fn):
        def run(seed: int) -> tuple[bool, dict]:
            t0 = time.perf_counter()
            ok, detail = fn(seed)
            dt = time.perf_counter() - t0
            if limit is not None:
                detail["runtime_limit_s"] = limit
                ok = ok and dt < limit
            return ok, detail
        run.__doc__ = fn.__doc__
        return run
    return wrap


@_timed(10.0)
def c1_zero_error(seed: int):
    """NS schemes on the 4-user path pattern, 10^4 trials per field."""
    detail, ok = {}, True
    for q in (5, 9):
        for scheme in ("ns-successive", "ns-multipartite"):
            rec = run_experiment(ExperimentConfig(scheme, {"network": "path", "K": 4},
                                                  field=f"GF({q})", trials=10**4, seed=seed))
            good = (rec.error_counts == [0] * 4
                    and all(abs(r - math.log2(q)) < 1e-12 for r in rec.rate_bits))
            detail[f"{scheme} GF({q})"] = {"errors": rec.error_counts, "rate_bits": rec.rate_bits[0]}
            ok &= good
    return ok, detail


@_timed(10.0)
def c2_factor_k(seed: int):
    """NS versus TDMA sum rate on the path network, q = 5, n = 100."""
    q, n, K = 5, 100, 4
    pattern = lower_triangular(K)
    tree = tree_from_pattern(pattern)
    rng = np.random.default_rng(seed)
    ns_runs = [ns_successive(pattern, f"GF({q})", rng=rng) for _ in range(100)]
    ns_ok = not any(r.per_user_error.any() for r in ns_runs)
    ns_sum = ns_runs[0].sum_rate
    d = leaf_saturating_dof(tree)
    td = classical_tdma(tree, d, f"GF({q})", n, rng=rng)
    bound = (1 + K / n) * math.log2(q)
    ratio = ns_sum / td.sum_rate
    detail = {"ns_sum_bits": ns_sum, "tdma_sum_bits": td.sum_rate, "tdma_bound_bits": bound,
              "ratio": ratio, "leaf_dof": d.tolist()}
    ok = (ns_ok and abs(ns_sum - K * math.log2(q)) < 1e-12 and td.sum_rate <= bound + 1e-12
          and not td.per_user_error.any() and ratio >= 3.8)
    return ok, detail


@_timed(900.0)
def c3_fano(seed: int):
    """Fano pattern: triangle number, min-rank by solver and by enumeration."""
    tri = triangle_number(FANO)
    gf3 = minrank_search(FANO, "GF(3)").rank
    oracle = minrank_bruteforce(FANO, "GF(3)", normalize_columns=True, max_matrices=2**21)
    gf4 = minrank_search(FANO, "GF(4)").rank
    gf2 = fitting_rank(FANO, "GF(2)", FANO.stars.astype(np.int64))
    detail = {"tri": tri, "minrank_GF3_solver": gf3, "minrank_GF3_oracle": oracle,
              "minrank_GF4": gf4, "rank_GF2_single_matrix": gf2}
    return tri == 3 and gf3 == 4 and oracle == 4 and gf4 == 3, detail


def _c4_patterns(seed: int, count: int = 200):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        K, B = (int(v) for v in rng.integers(2, 7, size=2))
        yield random_pattern(rng, K, B, float(rng.uniform(0.35, 0.8)))


@_timed(600.0)
def c4_minrank_equals_tri(seed: int):
    """min-rank equals tri for min(K, B) <= 6, and solver/oracle agreement."""
    mismatches, oracle_fail, oracle_checked = [], [], 0
    for pat in _c4_patterns(seed):
        tri = triangle_number(pat)
        for q in (2, 3, 4):
            mr = minrank_search(pat, f"GF({q})").rank
            if mr != tri:
                mismatches.append({"rows": pat.rows(), "q": q, "tri": tri, "minrank": mr})
            if pat.n_stars <= 12:
                oracle_checked += 1
                bf = minrank_bruteforce(pat, f"GF({q})", normalize_columns=True)
                if bf != mr:
                    oracle_fail.append({"rows": pat.rows(), "q": q, "solver": mr, "oracle": bf})
    by_q = {f"GF({q})": sum(m["q"] == q for m in mismatches) for q in (2, 3, 4)}
    detail = {"patterns": 200, "equality_mismatches": len(mismatches), "mismatches_by_field": by_q,
              "oracle_agreement": not oracle_fail,
              "first_mismatches": mismatches[:3], "oracle_checks": oracle_checked,
              "oracle_disagreements": oracle_fail[:3],
              "note": "equality fails over small fields; see the decisions ledger"}
    return not mismatches and not oracle_fail, detail


@_timed(60.0)
def c5_ns_verifier(seed: int):
    """Exact NS check of every box family; the leak box must be caught."""
    F = parse_field("GF(3)")
    boxes = {
        "triangular K=2": make_triangular_box(F, 2),
        "triangular K=3": make_triangular_box(F, 3),
        "otp k=2": make_otp_box(F, 2),
        "otp k=3": make_otp_box(F, 3),
        "fading-dirt": make_fading_dirt_box(F),
        "mac K=2 product": make_mac_box(F, 2, lambda t, a, b: F.mul(F.mul(t, a), b)),
    }
    detail, ok = {}, True
    for name, box in boxes.items():
        v = verify_nonsignaling(box.tabularize())
        detail[name] = bool(v.ok)
        ok &= bool(v.ok)
    leak = verify_nonsignaling(make_leak_box())
    detail["leak"] = {"ok": bool(leak.ok), "witness_subset": list(leak.subset or ())}
    return ok and not leak.ok and tuple(leak.subset) == (1,), detail


@_timed(None)
def c6_same_marginals(seed: int):
    """Coupled channels give equal per-user error probabilities."""
    detail, ok = {}, True
    for scheme in ("naive-blind", "ns-successive"):
        rec = compare_same_marginals(ExperimentConfig(scheme, {"network": "full", "K": 2},
                                                      field="GF(3)"), "exhaustive")
        detail[f"exhaustive {scheme}"] = rec.to_json()
        ok &= rec.exact_match
    rec = compare_same_marginals(ExperimentConfig("naive-blind", {"network": "full", "K": 2},
                                                  field="GF(5)", trials=10**5, seed=seed), "mc")
    detail["mc naive-blind GF(5)"] = rec.to_json()
    return ok and rec.within_band, detail


@_timed(1.0)
def c7_toy(seed: int):
    """Toy channels over GF(3): classical certificate and NS zero-error point."""
    lq = math.log2(3)
    cert = classical_toy_certificate(make_toy1("GF(3)"))
    detail = {"certificate": cert.values}
    ok = (abs(cert.values["I(U;Y2)"] - 0.5 * lq) <= 1e-9
          and abs(cert.values["R1+R2"] - 1.5 * lq) <= 1e-9)
    rng = np.random.default_rng(seed)
    for ch in (make_toy1("GF(3)"), make_toy2("GF(3)")):
        runs = [ns_toy(ch, rng=rng) for _ in range(1000)]
        errs = sum(int(r.per_user_error.sum()) for r in runs)
        detail[f"ns toy{ch.variant}"] = {"errors": errs, "rate_bits": runs[0].rate_bits.tolist()}
        ok &= errs == 0 and np.allclose(runs[0].rate_bits, lq)
    return ok, detail


@_timed(None)
def c8_fading_dirt(seed: int):
    """Fading dirty paper: NS zero error at q = 7, exact classical baseline."""
    rec = run_experiment(ExperimentConfig("fading-dirt", field="GF(7)", trials=10**4, seed=seed))
    ok = rec.error_counts == [0] and abs(rec.rate_bits[0] - math.log2(7)) < 1e-12
    detail = {"ns_errors": rec.error_counts[0], "ns_rate_bits": rec.rate_bits[0]}
    for q in (3, 5):
        base = fading_dirt_classical_baseline(f"GF({q})")
        ratio = math.log2(q) / base
        detail[f"GF({q})"] = {"baseline_bits": base, "separation_ratio": ratio}
        ok &= abs(base - math.log2(q) / q) <= 1e-9 and ratio >= q - 1e-9
    return ok, detail


@_timed(None)
def c9_mac(seed: int):
    """Converted MAC law equals the interference-free law for every input."""
    F = parse_field("GF(3)")
    states = [(a, b, c) for a in range(3) for b in range(3) for c in range(3)]
    state_law = {s: Fraction(1, 27) for s in states}
    noises = {"zero": {0: Fraction(1)},
              "skewed": {0: Fraction(1, 2), 1: Fraction(1, 3), 2: Fraction(1, 6)}}
    fs = {"product": lambda t, a, b: F.mul(F.mul(t, a), b),
          "sum": lambda t, a, b: F.add(F.add(t, a), b)}
    worst = Fraction(0)
    for fname, f in fs.items():
        conv = ConvertedMac(F, 2, f)
        for noise in noises.values():
            for x1 in range(3):
                for x2 in range(3):
                    tv = total_variation(conv.law((x1, x2), state_law, noise),
                                         interference_free_law(F, (x1, x2), noise))
                    worst = max(worst, tv)
    return worst == 0, {"max_total_variation": str(worst)}


@_timed(60.0)
def c10_gaussian(seed: int):
    """Gaussian conversion at P = 10^4 on the 3-user triangular network."""
    rng = np.random.default_rng(seed)
    try:
        run = gaussian_convert(3, 1e4, 10**5, rng=rng)
        violated = False
    except PowerViolation:
        run, violated = None, True
    if violated:
        return False, {"power_violation": True}
    diag = run.diagnostics
    ratio = gaussian_convert(3, 1e6, 10, rng=rng).diagnostics["dof_ratio"]
    detail = {"var_zbar": diag["var_zbar"], "per_antenna_power": diag["per_antenna_power"],
              "ser_floor": diag["ser_floor"], "ser_nearest": diag["ser_nearest"],
              "dof_ratio_P1e6": ratio}
    ok = (max(diag["var_zbar"]) <= 9 / 4 and max(diag["per_antenna_power"]) <= 1e4
          and 0.95 <= ratio <= 1.0 + 1e-12)
    return ok, detail


FIG_TDMA_TREE = TreeNetwork.from_parents([0, 1, 2, 2, 1, 5], [1, 2, 3, 4, 5, 6])


def fig_tdma_closed_form(d) -> dict[int, tuple[float, float]]:
    d1, d2, d3, d4, d5, d6 = d
    return {0: (0, d1), 1: (d1, d1 + d2), 2: (d1 + d2, d1 + d2 + d3),
            3: (d1 + d2, d1 + d2 + d4), 4: (d1, d1 + d5), 5: (d1 + d5, d1 + d5 + d6)}


@_timed(None)
def c11_tdma(seed: int):
    """Closed-form intervals on the six-antenna example and orthogonality on random trees."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        d = rng.uniform(0, 1, 6)
        # scale so the heaviest root path fits
        paths = [[0, 1, 2], [0, 1, 3], [0, 4, 5]]
        d = d / max(1.0, max(d[p].sum() for p in paths))
        sched = tdma_schedule(FIG_TDMA_TREE, d)
        want = fig_tdma_closed_form(d)
        for k, iv in want.items():
            worst = max(worst, abs(sched.receiver[k][0] - iv[0]), abs(sched.receiver[k][1] - iv[1]))
    orth = 0
    for _ in range(100):
        B = int(rng.integers(1, 9))
        K = int(rng.integers(B, 9))
        tree = random_tree(rng, B, K)
        d = rng.uniform(0, 1, K)
        heaviest = max(sum(d[k] for b in path for k in tree.receivers_of(b))
                       for path in tree.root_paths())
        d = d / max(1.0, heaviest)
        orth += tdma_schedule(tree, d).is_orthogonal()
    return worst <= 1e-12 and orth == 100, {"max_interval_error": worst, "orthogonal_trees": orth}


CRITERIA: list[tuple[int, str, Callable]] = [
    (1, "zero-error NS broadcast", c1_zero_error),
    (2, "factor-K sum-rate separation", c2_factor_k),
    (3, "Fano pattern ranks", c3_fano),
    (4, "min-rank equals triangle number for min(K,B) <= 6", c4_minrank_equals_tri),
    (5, "NS-condition verifier", c5_ns_verifier),
    (6, "same-marginals property", c6_same_marginals),
    (7, "toy-channel certificates", c7_toy),
    (8, "fading dirty paper", c8_fading_dirt),
    (9, "MAC conversion exactness", c9_mac),
    (10, "Gaussian conversion", c10_gaussian),
    (11, "TDMA scheduler", c11_tdma),
]


def run_criterion(number: int, seed: int = 2024) -> CriterionResult:
    for num, name, fn in CRITERIA:
        if num == number:
            t0 = time.perf_counter()
            try:
                ok, detail = fn(seed)
            except Exception as e:  # a crash is a failure, reported with its message
                ok, detail = False, {"error": f"{type(e).__name__}: {e}"}
            return CriterionResult(num, name, bool(ok), detail, time.perf_counter() - t0)
    raise KeyError(f"no criterion {number}")


def run_acceptance(only=None, seed: int = 2024, on_result=None) -> list[CriterionResult]:
    out = []
    for num, _, _ in CRITERIA:
        if only and num not in only:
            continue
        res = run_criterion(num, seed)
        if on_result:
            on_result(res)
        out.append(res)
    return out
