"""Command-line front end.

Exit codes: 0 on success, 2 on a usage error (bad flags, unreadable or
malformed input, unsupported field), 1 when a computation fails (budget
exceeded, infeasible DoF tuple, not a tree, failed acceptance criterion).
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from .acceptance import run_acceptance
from .channel import make_toy1, make_toy2
from .field import parse_field
from .harness import ConfigError, ExperimentConfig, compare_same_marginals, run_experiment
from .minrank import (BudgetExceeded, DEFAULT_BUDGET, find_triangle, minrank_search,
                      nonzeros_upper_bound, ns_sum_bounds)
from .schemes import classical_toy_certificate, fading_dirt_classical_baseline
from .nsbox import (TabularBox, make_fading_dirt_box, make_leak_box, make_mac_box, make_otp_box,
                    make_triangular_box, verify_nonsignaling)
from .topology import (ConnectivityPattern, InfeasibleDofError, NotATreeError, PatternError,
                       TreeNetwork, sum_dof, tdma_schedule, tree_from_pattern)


class UsageError(Exception):
    pass


def _field_arg(text: str):
    try:
        return parse_field(text)
    except (ValueError, TypeError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _dof_arg(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _load_pattern(path: str) -> ConnectivityPattern:
    data = _load_json(path)
    try:
        if isinstance(data, list):
            return ConnectivityPattern.from_rows(data)
        return ConnectivityPattern.from_json(data)
    except (KeyError, TypeError, PatternError) as e:
        raise UsageError(f"{path} is not a pattern: {e}") from None


def _load_tree(path: str) -> TreeNetwork:
    data = _load_json(path)
    try:
        if "parent" in data:
            return TreeNetwork.from_json(data)
        return tree_from_pattern(ConnectivityPattern.from_json(data))
    except NotATreeError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"{path} is not a tree network: {e}") from None


# -- subcommands ---------------------------------------------------------------------


def cmd_minrank(a):
    pat = _load_pattern(a.pattern)
    res = minrank_search(pat, a.field, a.budget)
    return {"field": a.field.name, "minrank": res.rank, "witness": res.witness.tolist(),
            "work": res.work}


def cmd_tri(a):
    tri = find_triangle(_load_pattern(a.pattern))
    return {"tri": len(tri), "triangle": [list(p) for p in tri]}


def cmd_bounds(a):
    pat = _load_pattern(a.pattern)
    b = ns_sum_bounds(pat, a.field, a.budget)
    return {"field": a.field.name, "tri": b.tri, "minrank": b.minrank,
            "lower_bits": b.lower_bits, "upper_bits": b.upper_bits, "tight": b.tight,
            "budget_exceeded": b.budget_exceeded, "nonzeros_upper_bound": nonzeros_upper_bound(pat)}


def cmd_tree(a):
    pat = _load_pattern(a.pattern)
    tree = tree_from_pattern(pat)
    classical, ns = sum_dof(tree)
    return {"tree": tree.to_json(), "dfs_order": tree.dfs_order(), "leaves": tree.leaves(),
            "sum_dof": {"classical": classical, "ns": ns}}


def cmd_schedule(a):
    tree = _load_tree(a.tree)
    if len(a.d) != tree.K:
        raise UsageError(f"--d needs {tree.K} values, got {len(a.d)}")
    sched = tdma_schedule(tree, a.d)
    return {"tree": tree.to_json(), "d": a.d, **sched.to_json(),
            "orthogonal": sched.is_orthogonal()}


def _box_from_args(a):
    F = a.field
    if a.box == "file":
        if not a.file:
            raise UsageError("--box file needs --file")
        try:
            return TabularBox.from_json(_load_json(a.file))
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"{a.file} is not a box: {e}") from None
    if a.box == "leak":
        return make_leak_box()
    if F is None:
        raise UsageError(f"--box {a.box} needs --field")
    if a.box == "otp":
        return make_otp_box(F, a.parties)
    if a.box == "triangular":
        return make_triangular_box(F, a.parties - 1)
    if a.box == "fading-dirt":
        return make_fading_dirt_box(F)
    if a.box == "mac":
        fns = {"product": lambda t, *s: F.mul(t, _prod(F, s)),
               "sum": lambda t, *s: F.add(t, _sum(F, s)),
               "zero": lambda t, *s: 0}
        return make_mac_box(F, a.parties - 1, fns[a.f])
    raise UsageError(f"unknown box {a.box!r}")


def _prod(F, xs):
    acc = 1
    for x in xs:
        acc = F.mul(acc, x)
    return acc


def _sum(F, xs):
    acc = 0
    for x in xs:
        acc = F.add(acc, x)
    return acc


def cmd_verify_box(a):
    box = _box_from_args(a)
    table = box if isinstance(box, TabularBox) else box.tabularize()
    v = verify_nonsignaling(table)
    out = {"box": a.box, "non_signaling": bool(v.ok)}
    if not v.ok:
        out["witness"] = {"subset": list(v.subset), "inputs": [list(map(_plain, x)) for x in v.inputs]}
    return out


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return int(v) if isinstance(v, (int, np.integer)) else v


def _channel_from_args(a) -> dict:
    if a.pattern:
        return {"pattern": _load_pattern(a.pattern).rows()}
    if a.tree:
        return {"tree": _load_tree(a.tree).to_json()}
    if a.network:
        kind, _, k = a.network.partition("-")
        if kind not in ("path", "full") or not k.isdigit():
            raise UsageError("--network must look like path-4 or full-2")
        return {"network": kind, "K": int(k)}
    return {}


def cmd_simulate(a):
    ch = _channel_from_args(a)
    if a.mac_f:
        ch["f"] = a.mac_f
    if a.noise_free:
        ch["noise"] = False
    cfg = ExperimentConfig(a.scheme, ch, field=a.field.name if a.field else None, power=a.power,
                           trials=a.trials, seed=a.seed, n=a.n, d=a.d, decoder=a.decoder,
                           out=None, csv=a.csv)
    if a.same_marginals:
        return compare_same_marginals(cfg, a.same_marginals).to_json()
    return run_experiment(cfg).to_json()


def cmd_mi_report(a):
    F = a.field
    if a.channel in ("toy1", "toy2"):
        ch = (make_toy1 if a.channel == "toy1" else make_toy2)(F)
        cert = classical_toy_certificate(ch)
        return {**cert.to_json(), "certified": cert.check(), "degenerate": ch.degenerate}
    base = fading_dirt_classical_baseline(F)
    return {"channel": "fading-dirt", "field": F.name, "rows": [
        {"quantity": "I(X;Y|G)", "value": base, "target": float(np.log2(F.q)) / F.q},
        {"quantity": "NS rate", "value": float(np.log2(F.q)), "target": float(np.log2(F.q))}]}


def cmd_acceptance(a):
    only = set(a.only) if a.only else None
    results = run_acceptance(only, a.seed, on_result=lambda r: print(r.line(), file=sys.stderr))
    report = {"passed": all(r.passed for r in results), "criteria": [r.to_json() for r in results]}
    return report


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsbc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("minrank", cmd_minrank, "exact min-rank of a pattern over a field")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--field", type=_field_arg, required=True)
    sp.add_argument("--budget", type=float, default=DEFAULT_BUDGET)

    sp = add("tri", cmd_tri, "triangle number of a pattern")
    sp.add_argument("--pattern", required=True)

    sp = add("bounds", cmd_bounds, "NS sum-capacity bounds in bits")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--field", type=_field_arg, required=True)
    sp.add_argument("--budget", type=float, default=DEFAULT_BUDGET)

    sp = add("tree", cmd_tree, "reconstruct a tree network from a pattern")
    sp.add_argument("--pattern", required=True)

    sp = add("schedule", cmd_schedule, "TDMA intervals for a tree and a DoF tuple")
    sp.add_argument("--tree", required=True)
    sp.add_argument("--d", type=_dof_arg, required=True)

    sp = add("verify-box", cmd_verify_box, "exact non-signaling check")
    sp.add_argument("--box", required=True,
                    choices=["otp", "triangular", "fading-dirt", "mac", "leak", "file"])
    sp.add_argument("--field", type=_field_arg)
    sp.add_argument("--parties", type=int, default=2)
    sp.add_argument("--f", choices=["product", "sum", "zero"], default="product",
                    help="interference function of the MAC box")
    sp.add_argument("--file", help="tabular box JSON for --box file")

    sp = add("simulate", cmd_simulate, "run a scheme for many seeded trials")
    sp.add_argument("--scheme", required=True, choices=[
        "ns-successive", "ns-multipartite", "naive", "naive-blind", "tdma", "fading-dirt",
        "ns-toy1", "ns-toy2", "mac-convert", "gaussian"])
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--pattern")
    g.add_argument("--tree")
    g.add_argument("--network", help="path-K or full-K")
    sp.add_argument("--field", type=_field_arg)
    sp.add_argument("--power", type=float)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--n", type=int, default=1, help="channel uses per trial (tdma, gaussian)")
    sp.add_argument("--d", type=_dof_arg)
    sp.add_argument("--decoder", choices=["floor", "nearest"], default="floor")
    sp.add_argument("--mac-f", choices=["sum", "product", "zero"])
    sp.add_argument("--noise-free", action="store_true")
    sp.add_argument("--csv", help="also write per-trial error rows to this CSV file")
    sp.add_argument("--same-marginals", choices=["mc", "exhaustive"],
                    help="compare against the coupled channel instead")

    sp = add("mi-report", cmd_mi_report, "exact information certificate")
    sp.add_argument("--channel", required=True, choices=["toy1", "toy2", "fading-dirt"])
    sp.add_argument("--field", type=_field_arg, required=True)

    sp = add("acceptance", cmd_acceptance, "run the acceptance matrix")
    sp.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        report = args.fn(args)
    except UsageError as e:
        print(f"nsbc {args.command}: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        print(f"nsbc {args.command}: {e}", file=sys.stderr)
        return 2 if e.usage else 1
    except (BudgetExceeded, InfeasibleDofError, NotATreeError, ValueError) as e:
        out = {"error": type(e).__name__, "message": str(e)}
        if isinstance(e, NotATreeError):
            out["witness"] = e.witness
        print(json.dumps(out, default=_plain), file=sys.stderr)
        return 1
    text = json.dumps(report, indent=2, sort_keys=True, default=_plain) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.command == "acceptance" and not report["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
