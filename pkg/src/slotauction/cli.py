"""Batch experiment harness.

Commands:
  solve      run one winner-determination algorithm on an instance + bids
  mechanism  run vcg or myerson once, write payments/utilities CSV
  simulate   Monte Carlo over sampled value profiles, write per-sample CSV
  audit      property sweep over random instances; nonzero exit on violation

Every flag can also be supplied through a JSON config file (--config);
command-line flags win.  All randomness flows from --seed, and each
simulation sample derives its own stream from (seed, sample index), so
identical configs give byte-identical outputs.

Exit codes: 0 ok, 1 usage error, 2 solver error, 3 audit failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import cascade_wdp, core, mechanisms, oracle
from .core import CASCADE, Instance, MNL, welfare
from .distributions import ValueDistribution, dist_from_dict, sample
from .mnl_wdp import dinkelbach_check, solve_mnl_wdp

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_AUDIT = 3


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotauction",
        description="Position-auction winner determination and mechanisms.",
    )
    parser.add_argument("command",
                        choices=["solve", "mechanism", "simulate", "audit"])
    parser.add_argument("--config", help="JSON file with flag defaults")
    parser.add_argument("--instance", help="instance JSON path")
    parser.add_argument("--values", help="values JSON path (array of floats)")
    parser.add_argument("--dist", help="distribution config JSON path")
    parser.add_argument("--algorithm",
                        help="solve: lp | dinkelbach | greedy | ptas | brute")
    parser.add_argument("--mechanism", dest="mechanism_name",
                        help="vcg | myerson | both")
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--grid", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output path (JSON or CSV)")
    parser.add_argument("--planted-bug", action="store_true",
                        help="audit: swap in the broken fixture solver")
    return parser


_CONFIG_KEYS = {
    "instance": str, "values": str, "dist": str, "algorithm": str,
    "mechanism": str, "epsilon": float, "grid": int, "samples": int,
    "seed": int, "out": str, "planted_bug": bool,
}


def _merge_config(args: argparse.Namespace) -> dict:
    merged = {
        "epsilon": 0.1, "grid": 1024, "samples": 1000, "seed": 0,
        "mechanism": "both", "planted_bug": False,
        "instance": None, "values": None, "dist": None, "algorithm": None,
        "out": None,
    }
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        for key, value in raw.items():
            if key not in _CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = _CONFIG_KEYS[key](value)
    overrides = {
        "instance": args.instance, "values": args.values, "dist": args.dist,
        "algorithm": args.algorithm, "mechanism": args.mechanism_name,
        "epsilon": args.epsilon, "grid": args.grid, "samples": args.samples,
        "seed": args.seed, "out": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    if args.planted_bug:
        merged["planted_bug"] = True
    if not 0.0 < merged["epsilon"] < 1.0:
        raise UsageError(f"epsilon must lie in (0, 1), got {merged['epsilon']}")
    return merged


def _load_instance(cfg: dict) -> Instance:
    if not cfg["instance"]:
        raise UsageError("--instance is required for this command")
    with open(cfg["instance"]) as fh:
        return core.instance_from_dict(json.load(fh))


def _load_values(cfg: dict, n: int) -> np.ndarray:
    if not cfg["values"]:
        raise UsageError("--values is required for this command")
    with open(cfg["values"]) as fh:
        vals = np.asarray(json.load(fh), dtype=float)
    if vals.shape != (n,):
        raise UsageError(f"expected {n} values, got shape {vals.shape}")
    return vals


def _load_dists(cfg: dict, n: int) -> list[ValueDistribution]:
    if not cfg["dist"]:
        raise UsageError("--dist is required for this command")
    with open(cfg["dist"]) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict):
        raw = [raw] * n
    if len(raw) != n:
        raise UsageError(f"expected 1 or {n} distributions, got {len(raw)}")
    return [dist_from_dict(d) for d in raw]


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: Sequence[str], rows: list[Sequence]) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_solve(cfg: dict) -> int:
    inst = _load_instance(cfg)
    bids = _load_values(cfg, inst.n)
    algorithm = cfg["algorithm"]
    if algorithm not in ("lp", "dinkelbach", "greedy", "ptas", "brute"):
        raise UsageError(f"unknown algorithm {cfg['algorithm']!r}")

    if algorithm in ("lp", "dinkelbach"):
        result = (solve_mnl_wdp if algorithm == "lp" else dinkelbach_check)(
            inst, bids
        )
        alloc = result.allocation
        sigma = {j: r + 1 for r, (_i, j) in enumerate(alloc.pairs())}
        pi, objective = result.ctrs, result.objective
    elif algorithm == "greedy":
        rng = np.random.default_rng(cfg["seed"])
        chi = cascade_wdp.combined_cascade_solver(inst, bids, rng)
        alloc, sigma = chi.allocation, chi.permutation.rank
        pi = core.cascade_ctr(inst, chi)
        objective = welfare(bids, pi)
    elif algorithm == "ptas":
        alloc = cascade_wdp.ptas_restricted_welfare(inst, bids, cfg["epsilon"])
        perm = cascade_wdp.optimal_permutation(alloc, bids)
        chi = core.AugmentedAllocation(alloc, perm)
        sigma = perm.rank
        pi = core.cascade_ctr(inst, chi)
        objective = welfare(bids, pi)
    else:  # brute
        if inst.model == MNL:
            result = oracle.brute_force_wdp_mnl(inst, bids)
            alloc, pi, objective = result.allocation, result.ctrs, result.objective
            sigma = {j: r + 1 for r, (_i, j) in enumerate(alloc.pairs())}
        else:
            chi, objective = oracle.brute_force_wdp_cascade(inst, bids)
            alloc, sigma = chi.allocation, chi.permutation.rank
            pi = core.cascade_ctr(inst, chi)

    report = {
        "algorithm": algorithm,
        "allocation": {str(i): j for i, j in alloc.pairs()},
        "sigma": {str(j): r for j, r in sorted(sigma.items())},
        "pi": list(np.asarray(pi, dtype=float)),
        "objective": float(objective),
    }
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", cfg["out"])
    return EXIT_OK


def _run_mechanism(
    name: str, inst: Instance, values: np.ndarray,
    dists: list[ValueDistribution] | None, grid: int,
) -> mechanisms.MechanismOutcome:
    solver = (mechanisms.exact_mnl_solver() if inst.model == MNL
              else mechanisms.brute_cascade_solver())
    if name == "vcg":
        return mechanisms.vcg(inst, values, solver)
    if name == "myerson":
        if dists is None:
            raise UsageError("myerson requires --dist")
        return mechanisms.myerson(inst, values, dists, solver, grid_size=grid)
    raise UsageError(f"unknown mechanism {name!r}")


def cmd_mechanism(cfg: dict) -> int:
    inst = _load_instance(cfg)
    values = _load_values(cfg, inst.n)
    name = cfg["mechanism"]
    if name not in ("vcg", "myerson"):
        raise UsageError("mechanism command needs --mechanism vcg|myerson")
    dists = _load_dists(cfg, inst.n) if name == "myerson" else None
    outcome = _run_mechanism(name, inst, values, dists, cfg["grid"])
    rows = [
        [i, repr(float(values[i])), repr(float(outcome.ctrs[i])),
         repr(float(outcome.payments[i])), repr(float(outcome.utilities[i]))]
        for i in range(inst.n)
    ]
    _emit(
        _csv_text(["advertiser", "value", "ctr", "payment", "utility"], rows),
        cfg["out"],
    )
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    inst = _load_instance(cfg)
    dists = _load_dists(cfg, inst.n)
    which = cfg["mechanism"]
    names = ["vcg", "myerson"] if which == "both" else [which]
    if any(n not in ("vcg", "myerson") for n in names):
        raise UsageError(f"unknown mechanism {which!r}")

    rows = []
    totals = {n: [] for n in names}
    revenues = {n: [] for n in names}
    for s in range(cfg["samples"]):
        rng = np.random.default_rng([cfg["seed"], s])
        values = np.array([sample(d, rng) for d in dists])
        for name in names:
            outcome = _run_mechanism(name, inst, values, dists, cfg["grid"])
            w = welfare(values, outcome.ctrs)
            r = float(np.sum(outcome.payments))
            rows.append([s, name, repr(w), repr(r), cfg["seed"]])
            totals[name].append(w)
            revenues[name].append(r)
    def _stderr(series):
        if len(series) < 2:
            return 0.0
        return float(np.std(series, ddof=1) / math.sqrt(len(series)))

    for name in names:
        rows.append(["mean", name, repr(float(np.mean(totals[name]))),
                     repr(float(np.mean(revenues[name]))), cfg["seed"]])
        rows.append(["stderr", name, repr(_stderr(totals[name])),
                     repr(_stderr(revenues[name])), cfg["seed"]])
    _emit(
        _csv_text(["sample", "mechanism", "welfare", "revenue", "seed"], rows),
        cfg["out"],
    )
    return EXIT_OK


def _random_cascade_instance(rng: np.random.Generator,
                             nmax: int = 4, mmax: int = 4) -> Instance:
    n = int(rng.integers(1, nmax + 1))
    m = int(rng.integers(1, mmax + 1))
    k = int(rng.integers(1, m + 1))
    return Instance(n=n, m=m, k=k, p=rng.uniform(0.01, 1.0, (n, m)),
                    model=CASCADE)


def _random_mnl_instance(rng: np.random.Generator,
                         nmax: int = 4, mmax: int = 4) -> Instance:
    n = int(rng.integers(1, nmax + 1))
    m = int(rng.integers(1, mmax + 1))
    k = int(rng.integers(1, m + 1))
    return Instance(n=n, m=m, k=k, p=rng.uniform(0.01, 0.95, (n, m)),
                    model=MNL)


def cmd_audit(cfg: dict) -> int:
    """Monotonicity sweeps plus welfare-ratio properties on random
    instances.  Emits one CSV row per checked ratio; exits 3 on the first
    violated property with the counterexample printed to stderr."""
    rng = np.random.default_rng(cfg["seed"])
    failures: list[str] = []
    ratio_rows: list[Sequence] = []

    mnl_solver = mechanisms.exact_mnl_solver()
    if cfg["planted_bug"]:
        mnl_solver = mechanisms.threshold_dropping_solver(mnl_solver, 5.0)
    sweep = np.linspace(0.25, 10.0, 8)
    for t in range(20):
        inst = _random_mnl_instance(rng)
        bids = rng.uniform(0.1, 10.0, inst.n)
        for i in range(inst.n):
            hit = mechanisms.monotonicity_audit(mnl_solver, inst, bids, i, sweep)
            if hit is not None:
                failures.append(
                    f"mnl monotonicity: trial {t} advertiser {i}: ctr"
                    f" {hit[2]:.9f} -> {hit[3]:.9f} as bid {hit[0]} -> {hit[1]}"
                )
        if failures:
            break

    if not failures:
        for t in range(20):
            inst = _random_cascade_instance(rng)
            values = rng.uniform(0.1, 10.0, inst.n)

            # true vs restricted welfare never leaves the 4x sandwich
            for alloc in oracle.enumerate_matchings(inst):
                chi = core.AugmentedAllocation(
                    alloc, cascade_wdp.optimal_permutation(alloc, values))
                w = welfare(values, core.cascade_ctr(inst, chi))
                wr = welfare(
                    values, cascade_wdp.restricted_ctr(inst, alloc, values))
                ratio = wr / w if w > 0 else 1.0
                ratio_rows.append([t, "restricted_over_cascade", repr(ratio)])
                if not (w - 1e-9 <= wr <= 4.0 * w + 1e-9):
                    failures.append(
                        f"sandwich violated on trial {t}: welfare {w}"
                        f" restricted {wr} alloc {alloc.assignment}")
                    break

            # approximation ratios of the two cascade algorithms
            _chi_opt, w_opt = oracle.brute_force_wdp_cascade(inst, values)
            if w_opt > 0:
                out = cascade_wdp.ptas_restricted_welfare(
                    inst, values, cfg["epsilon"])
                chi = core.AugmentedAllocation(
                    out, cascade_wdp.optimal_permutation(out, values))
                w_ptas = welfare(values, core.cascade_ctr(inst, chi))
                ratio_rows.append([t, "ptas_over_opt", repr(w_ptas / w_opt)])
                if w_ptas < (1.0 - cfg["epsilon"]) / 4.0 * w_opt - 1e-9:
                    failures.append(
                        f"restricted-search ratio violated on trial {t}:"
                        f" {w_ptas} vs optimum {w_opt}")
                cands = cascade_wdp.combined_cascade_candidates(inst, values)
                avg = float(np.mean([
                    welfare(values, core.cascade_ctr(inst, c)) for c in cands
                ]))
                bound = w_opt / (28.0 * math.log2(4 * inst.m))
                ratio_rows.append([t, "bucket_avg_over_opt", repr(avg / w_opt)])
                if avg < bound - 1e-9:
                    failures.append(
                        f"bucket-average ratio violated on trial {t}:"
                        f" {avg} vs bound {bound}")
            if failures:
                break

    if cfg["out"]:
        _emit(_csv_text(["ratio", "bin_lo", "bin_hi", "count"],
                        _histogram_rows(ratio_rows)), cfg["out"])
    if failures:
        print("\n".join(failures), file=sys.stderr)
        return EXIT_AUDIT
    print("audit clean")
    return EXIT_OK


def _histogram_rows(ratio_rows: list[Sequence]) -> list[Sequence]:
    """Bin the collected ratios (width 0.25, range [0, 4.25)) per kind."""
    edges = [0.25 * b for b in range(18)]
    counts: dict[tuple[str, int], int] = {}
    for _trial, kind, value in ratio_rows:
        x = min(max(float(value), 0.0), edges[-1] - 1e-12)
        b = int(x / 0.25)
        counts[(kind, b)] = counts.get((kind, b), 0) + 1
    return [
        [kind, repr(edges[b]), repr(edges[b + 1]), counts[(kind, b)]]
        for kind, b in sorted(counts)
    ]


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return EXIT_USAGE
    try:
        cfg = _merge_config(args)
        handler = {
            "solve": cmd_solve,
            "mechanism": cmd_mechanism,
            "simulate": cmd_simulate,
            "audit": cmd_audit,
        }[args.command]
        return handler(cfg)
    except (UsageError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # solver / validation failures
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
