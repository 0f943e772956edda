"""Experiment runner: every operation as a reproducible subcommand.

Each invocation runs exactly one experiment, writes a machine-readable
result (CSV or JSON, floats at 17 significant digits), and, when writing
to a file, a metadata sidecar carrying the package version, the exact
command line, and the wall time. Result files contain no timestamps, so
identical configuration and seed give byte-identical bytes.

Exit codes: 0 success, 2 invalid configuration, 3 state-space cap
exceeded, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    chain_rule_residual,
    complete_alpha_lower_bound,
    lsc_search,
    spectral_gap,
    ucc_alpha_lower_bound,
)
from .chains import ChainSpec, build_kernel
from .comparison import (
    UNIVERSAL_CONGESTION_BOUND,
    congestion_delta,
    dirichlet_comparison_residual,
)
from .core import tuple_space_size
from .errors import InvariantViolation, StateCapExceeded
from .generic import (
    generic_fraction_exact,
    generic_fraction_mc,
    make_partition,
    verify_tgrev_product_structure,
)
from .mixing import kwise_stat_mc, tv_curve
from .reports import csv_lines, dump_kernel, json_dumps
from .rng import make_rng


def _chain_arguments(sub: argparse.ArgumentParser, families: tuple[str, ...]) -> None:
    sub.add_argument("--chain", required=True, choices=families)
    sub.add_argument("--k", type=int, default=1)
    sub.add_argument("--n", type=int, help="wires (rev/grev/tgrev)")
    sub.add_argument("--N", type=int, dest="ncolors", help="colors (cc/ucc/complete)")
    sub.add_argument("--gate-mode", choices=("parameter", "set"), default="parameter")
    sub.add_argument("--part-w", type=int, help="partition block width override")
    sub.add_argument("--part-p", type=int, help="partition block count override")


def _common_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--out", default="-", help="output path, '-' for stdout")
    sub.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def _spec_from_args(args: argparse.Namespace) -> ChainSpec:
    partition = None
    if args.chain in ("grev", "tgrev"):
        if args.n is None:
            raise ValueError(f"--chain {args.chain} needs --n")
        partition = make_partition(args.n, args.k, w=args.part_w, p=args.part_p)
    return ChainSpec(
        family=args.chain,
        k=args.k,
        n=args.n,
        ncolors=args.ncolors,
        partition=partition,
        gate_mode=args.gate_mode,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwmix",
        description="Exact and Monte Carlo experiments on the mixing chains "
                    "of random reversible circuits and clique recoloring.",
    )
    parser.add_argument("--version", action="version", version=f"kwmix {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sub = subs.add_parser("kernel-dump", help="write an exact kernel "
                          "(JSON header line + row,col,prob CSV triples)")
    _chain_arguments(sub, ("rev", "cc", "ucc", "grev", "tgrev", "complete"))
    _common_arguments(sub)

    sub = subs.add_parser("gap", help="spectral gap of an exact kernel")
    _chain_arguments(sub, ("rev", "cc", "ucc", "grev", "tgrev", "complete"))
    _common_arguments(sub)

    sub = subs.add_parser("lsc-search", help="multi-start search for small "
                          "log-Sobolev ratios (upper bounds on the constant)")
    _chain_arguments(sub, ("rev", "cc", "ucc", "tgrev", "complete"))
    sub.add_argument("--restarts", type=int, default=200)
    sub.add_argument("--tol", type=float, default=1e-10)
    _common_arguments(sub)

    sub = subs.add_parser("chain-rule-check", help="residual of the "
                          "conditional-entropy chain rule on random functions")
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--N", type=int, dest="ncolors", required=True)
    sub.add_argument("--count", type=int, default=100)
    _common_arguments(sub)

    sub = subs.add_parser("congestion", help="exact comparison constant of "
                          "the uniform-to-standard recoloring path map")
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--N", type=int, dest="ncolors", required=True)
    _common_arguments(sub)

    sub = subs.add_parser("compare-check", help="Dirichlet-form comparison "
                          "residual on random functions")
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--N", type=int, dest="ncolors", required=True)
    sub.add_argument("--count", type=int, default=100)
    _common_arguments(sub)

    sub = subs.add_parser("mix-exact", help="exact mixing time and TV decay")
    _chain_arguments(sub, ("rev", "cc", "ucc", "grev", "tgrev", "complete"))
    sub.add_argument("--eps", type=float, default=0.25)
    sub.add_argument("--max-steps", type=int, default=100_000)
    _common_arguments(sub)

    sub = subs.add_parser("mix-mc", help="sampled end-state frequencies of "
                          "t-step trajectories vs the uniform stationary law")
    _chain_arguments(sub, ("rev", "cc", "ucc", "tgrev"))
    sub.add_argument("--t", type=int, required=True)
    sub.add_argument("--samples", type=int, default=100_000)
    _common_arguments(sub)

    sub = subs.add_parser("kwise-exact", help="exact k-wise approximation "
                          "error of the t-gate circuit (max-start TV)")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--t", type=int, required=True)
    sub.add_argument("--gate-mode", choices=("parameter", "set"), default="parameter")
    _common_arguments(sub)

    sub = subs.add_parser("kwise-test", help="chi-square test of a projected "
                          "circuit-output statistic against its uniform law")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--gates", type=int, required=True)
    sub.add_argument("--samples", type=int, default=100_000)
    sub.add_argument("--statistic", choices=("hamming", "xor", "lowbits"),
                     default="xor")
    sub.add_argument("--bins", type=int)
    sub.add_argument("--sampler", choices=("circuit", "uniform"), default="circuit")
    _common_arguments(sub)

    sub = subs.add_parser("generic-frac", help="generic-state fraction "
                          "(Monte Carlo with Wilson interval, or exact)")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--part-w", type=int)
    sub.add_argument("--part-p", type=int)
    sub.add_argument("--samples", type=int, default=10_000)
    sub.add_argument("--exact", action="store_true",
                     help="enumerate instead of sampling (tiny n only)")
    _common_arguments(sub)

    sub = subs.add_parser("tgrev-verify", help="verify the product structure "
                          "of the generic-state product chain")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--k", type=int, required=True)
    sub.add_argument("--part-w", type=int, required=True)
    sub.add_argument("--part-p", type=int, required=True)
    _common_arguments(sub)

    sub = subs.add_parser("batch", help="run a JSON list of saved command "
                          "lines (e.g. from metadata sidecars)")
    sub.add_argument("file", help="JSON: list of argv lists, or an object "
                     "with a 'command' key as written to sidecars")
    return parser


# ---------------------------------------------------------------------------
# Subcommand implementations: each returns (json_obj, csv_header, csv_rows)
# ---------------------------------------------------------------------------


def _run_kernel_dump(args) -> tuple[dict, None, None]:
    spec = _spec_from_args(args)
    kernel = build_kernel(spec)
    buf = io.StringIO()
    dump_kernel(kernel, buf)
    return {"_raw": buf.getvalue()}, None, None


def _run_gap(args):
    spec = _spec_from_args(args)
    kernel = build_kernel(spec)
    gap = spectral_gap(kernel)
    obj = {"kernel": spec.label(), "states": kernel.size, "spectral_gap": gap}
    return obj, ("kernel", "states", "spectral_gap"), [
        (spec.label(), kernel.size, gap)]


def _paper_alpha_bound(spec: ChainSpec, log_base: float) -> float | None:
    if spec.family == "complete":
        return complete_alpha_lower_bound(spec.ncolors, log_base)
    if spec.family == "ucc" and 2 * spec.k <= spec.ncolors:
        return ucc_alpha_lower_bound(spec.k, spec.ncolors, log_base)
    return None


def _run_lsc_search(args):
    spec = _spec_from_args(args)
    kernel = build_kernel(spec)
    result = lsc_search(kernel, restarts=args.restarts, tol=args.tol,
                        seed=args.seed, threads=args.threads)
    bound_ln = _paper_alpha_bound(spec, math.e)
    bound_lg2 = _paper_alpha_bound(spec, 2.0)
    obj = {
        "kernel": spec.label(),
        "restarts": result.restarts,
        "best_ratio": result.best_ratio,
        "paper_bound": bound_ln,
        "margin": None if bound_ln is None else result.best_ratio - bound_ln,
        "paper_bound_log2": bound_lg2,
        "margin_log2": None if bound_lg2 is None else result.best_ratio - bound_lg2,
    }
    header = ("kernel", "restarts", "best_ratio", "paper_bound", "margin",
              "paper_bound_log2", "margin_log2")
    row = tuple("" if obj[h.replace("-", "_")] is None else obj[h.replace("-", "_")]
                for h in header)
    return obj, header, [row]


def _run_chain_rule_check(args):
    k, N = args.k, args.ncolors
    size = tuple_space_size(k, N)
    rng = make_rng(args.seed)
    rows = []
    worst_abs = worst_rel = 0.0
    from .analysis import entropy

    for i in range(k):
        max_abs = max_rel = 0.0
        for _ in range(args.count):
            f = rng.random(size) + 0.05
            res = chain_rule_residual(f, i, k, N)
            ent = entropy(np.full(size, 1.0 / size), f)
            max_abs = max(max_abs, res)
            max_rel = max(max_rel, res / ent if ent > 0 else res)
        rows.append((k, N, i, args.count, max_abs, max_rel))
        worst_abs = max(worst_abs, max_abs)
        worst_rel = max(worst_rel, max_rel)
    obj = {"k": k, "N": N, "count": args.count,
           "max_abs_residual": worst_abs, "max_rel_residual": worst_rel,
           "per_coordinate": [
               {"i": r[2], "max_abs_residual": r[4], "max_rel_residual": r[5]}
               for r in rows]}
    return obj, ("k", "N", "i", "count", "max_abs_residual", "max_rel_residual"), rows


def _run_congestion(args):
    result = congestion_delta(args.k, args.ncolors)
    edge = f"{result.argmax_edge[0]}->{result.argmax_edge[1]}"
    obj = {
        "k": result.k, "N": result.N,
        "A_delta_exact": result.a_delta,
        "paper_bound_19": UNIVERSAL_CONGESTION_BOUND,
        "formula_bound": result.formula_bound,
        "argmax_edge": edge,
    }
    header = ("k", "N", "A_delta_exact", "paper_bound_19", "formula_bound",
              "argmax_edge")
    return obj, header, [(result.k, result.N, result.a_delta,
                          UNIVERSAL_CONGESTION_BOUND, result.formula_bound, edge)]


def _run_compare_check(args):
    k, N = args.k, args.ncolors
    ucc = build_kernel(ChainSpec(family="ucc", k=k, ncolors=N))
    cc = build_kernel(ChainSpec(family="cc", k=k, ncolors=N))
    a_delta = congestion_delta(k, N).a_delta
    rng = make_rng(args.seed)
    worst = 0.0
    for _ in range(args.count):
        f = rng.random(ucc.size)
        worst = max(worst, dirichlet_comparison_residual(
            np.sqrt(f), k, N, a_delta, ucc, cc))
    obj = {"k": k, "N": N, "count": args.count, "A_delta": a_delta,
           "max_residual": worst}
    header = ("k", "N", "count", "A_delta", "max_residual")
    return obj, header, [(k, N, args.count, a_delta, worst)]


def _run_mix_exact(args):
    spec = _spec_from_args(args)
    kernel = build_kernel(spec)
    from .mixing import TRANSITIVE_FAMILIES, mixing_time_exact

    tau = mixing_time_exact(kernel, args.eps, max_steps=args.max_steps)
    # report the worst-start TV decay out to 2*tau
    t_max = max(2 * tau, 1)
    if spec.family in TRANSITIVE_FAMILIES:
        starts = [0]
    else:
        starts = range(kernel.size)
    curves = np.array([tv_curve(kernel, s, t_max) for s in starts])
    worst = curves.max(axis=0)
    series = [(t, float(v)) for t, v in enumerate(worst)]
    obj = {"kernel": spec.label(), "epsilon": args.eps, "tau": tau,
           "series": [{"t": t, "tv": v} for t, v in series]}
    return obj, ("t", "tv"), series


def _run_mix_mc(args):
    spec = _spec_from_args(args)
    if spec.family == "rev":
        space = tuple_space_size(spec.k, 1 << spec.n)
        start = tuple(range(spec.k))
    elif spec.family in ("ucc", "cc"):
        space = tuple_space_size(spec.k, spec.ncolors)
        start = tuple(range(spec.k))
    else:  # tgrev
        from .chains import enumerate_generic_states
        from .generic import count_generic_states

        space = count_generic_states(spec.partition)
        start = enumerate_generic_states(spec.k, spec.partition)[0]

    rng = make_rng(args.seed)
    counts: dict[tuple[int, ...], int] = {}
    from . import chains as ch

    tables = None
    if spec.family == "rev" and spec.gate_mode == "set":
        from .core import dedupe_gates

        tables = dedupe_gates(spec.n)
    for _ in range(args.samples):
        x = start
        for _ in range(args.t):
            if spec.family == "ucc":
                x = ch.step_ucc(x, spec.ncolors, rng)
            elif spec.family == "cc":
                x = ch.step_cc(x, spec.ncolors, rng)
            elif spec.family == "rev":
                x = ch.step_rev(x, spec.n, rng, spec.gate_mode, tables)
            else:
                x = ch.step_tgrev(x, spec.partition, rng)
        counts[x] = counts.get(x, 0) + 1

    m = args.samples
    expected = m / space
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    chi2 += (space - len(counts)) * expected
    dof = space - 1
    from scipy import stats as sps

    p_value = float(sps.chi2.sf(chi2, dof))
    emp_tv = 0.5 * (sum(abs(c / m - 1.0 / space) for c in counts.values())
                    + (space - len(counts)) / space)
    obj = {"kernel": spec.label(), "t": args.t, "samples": m, "states": space,
           "distinct_visited": len(counts), "chi2": chi2, "dof": dof,
           "p_value": p_value, "empirical_tv": emp_tv, "seed": args.seed}
    header = ("kernel", "t", "samples", "states", "chi2", "dof", "p_value",
              "empirical_tv", "seed")
    return obj, header, [(spec.label(), args.t, m, space, chi2, dof, p_value,
                          emp_tv, args.seed)]


def _run_kwise_exact(args):
    spec = ChainSpec(family="rev", k=args.k, n=args.n, gate_mode=args.gate_mode)
    kernel = build_kernel(spec)
    pt = kernel.transpose_csr()
    dists = np.eye(kernel.size)
    pi = kernel.stationary[:, None]
    series = []
    for t in range(args.t + 1):
        tv = float(np.max(0.5 * np.abs(dists - pi).sum(axis=0)))
        series.append((t, tv))
        if t < args.t:
            dists = pt @ dists
    obj = {"n": args.n, "k": args.k, "gate_mode": args.gate_mode,
           "series": [{"t": t, "tv": v} for t, v in series],
           "final_tv": series[-1][1]}
    return obj, ("t", "tv"), series


def _run_kwise_test(args):
    report = kwise_stat_mc(
        n=args.n, k=args.k, gates=args.gates, samples=args.samples,
        statistic=args.statistic, seed=args.seed, bins=args.bins,
        sampler=args.sampler,
    )
    obj = {"n": report.n, "k": report.k, "gates": report.gates,
           "M": report.samples, "statistic": report.statistic,
           "bins": report.bins, "chi2": report.chi2, "dof": report.dof,
           "p_value": report.p_value, "seed": report.seed,
           "gate_mode": report.gate_mode, "sampler": report.sampler}
    header = ("n", "k", "gates", "M", "statistic", "bins", "chi2", "dof",
              "p_value", "seed", "gate_mode", "sampler")
    return obj, header, [tuple(obj[h] for h in header)]


def _run_generic_frac(args):
    partition = make_partition(args.n, args.k, w=args.part_w, p=args.part_p)
    if args.exact:
        frac = generic_fraction_exact(partition)
        obj = {"n": args.n, "k": args.k, "w": partition.w, "p": partition.p,
               "mode": "exact", "fraction": float(frac),
               "fraction_numerator": frac.numerator,
               "fraction_denominator": frac.denominator}
        header = ("n", "k", "w", "p", "mode", "fraction")
        rows = [(args.n, args.k, partition.w, partition.p, "exact", float(frac))]
        return obj, header, rows
    est = generic_fraction_mc(partition, args.samples, seed=args.seed)
    obj = {"n": args.n, "k": args.k, "w": partition.w, "p": partition.p,
           "mode": "mc", "fraction": est.fraction, "hits": est.hits,
           "samples": est.samples, "wilson_low": est.wilson_low,
           "wilson_high": est.wilson_high,
           "union_bound_low": est.union_bound_low, "seed": args.seed}
    header = ("n", "k", "w", "p", "mode", "fraction", "wilson_low",
              "wilson_high", "union_bound_low", "samples", "seed")
    rows = [(args.n, args.k, partition.w, partition.p, "mc", est.fraction,
             est.wilson_low, est.wilson_high, est.union_bound_low,
             est.samples, args.seed)]
    return obj, header, rows


def _run_tgrev_verify(args):
    partition = make_partition(args.n, args.k, w=args.part_w, p=args.part_p)
    report = verify_tgrev_product_structure(partition, args.k)
    obj = {
        "n": args.n, "k": args.k, "w": partition.w, "p": partition.p,
        "max_mixture_deviation": report.max_mixture_deviation,
        "max_block_factor_deviation": report.max_block_factor_deviation,
        "max_remainder_deviation": report.max_remainder_deviation,
        "gap_product": report.gap_product,
        "gap_blocks": report.gap_blocks,
        "gap_remainder": report.gap_remainder,
        "gap_identity_error": report.gap_identity_error,
        "passes": report.passes(),
    }
    header = tuple(obj)
    return obj, header, [tuple(obj[h] for h in header)]


_RUNNERS = {
    "kernel-dump": _run_kernel_dump,
    "gap": _run_gap,
    "lsc-search": _run_lsc_search,
    "chain-rule-check": _run_chain_rule_check,
    "congestion": _run_congestion,
    "compare-check": _run_compare_check,
    "mix-exact": _run_mix_exact,
    "mix-mc": _run_mix_mc,
    "kwise-exact": _run_kwise_exact,
    "kwise-test": _run_kwise_test,
    "generic-frac": _run_generic_frac,
    "tgrev-verify": _run_tgrev_verify,
}


def _render(args, obj, header, rows) -> str:
    if "_raw" in obj:
        return obj["_raw"]
    if args.format == "json":
        return json_dumps(obj) + "\n"
    return "\n".join(csv_lines(header, rows)) + "\n"


def _write_result(args, argv: list[str], text: str, wall_time: float) -> None:
    if args.out == "-":
        sys.stdout.write(text)
        return
    with open(args.out, "w") as fp:
        fp.write(text)
    params = {k: v for k, v in vars(args).items() if k != "subcommand"}
    sidecar = {
        "version": __version__,
        "command": argv,
        "params": params,
        "output": args.out,
        "wall_time_s": wall_time,
    }
    with open(args.out + ".meta.json", "w") as fp:
        fp.write(json_dumps(sidecar) + "\n")


def _run_batch(args) -> int:
    import json

    with open(args.file) as fp:
        payload = json.load(fp)
    if isinstance(payload, dict):
        payload = [payload]
    status = 0
    for entry in payload:
        argv = entry["command"] if isinstance(entry, dict) else entry
        code = main(list(argv))
        status = max(status, code)
    return status


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand == "batch":
        return _run_batch(args)
    runner = _RUNNERS[args.subcommand]
    started = time.perf_counter()
    try:
        obj, header, rows = runner(args)
    except (ValueError, IndexError) as exc:
        print(f"kwmix: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except StateCapExceeded as exc:
        print(f"kwmix: state cap exceeded: {exc}", file=sys.stderr)
        return 3
    except InvariantViolation as exc:
        print(f"kwmix: internal invariant violated: {exc}", file=sys.stderr)
        return 4
    wall_time = time.perf_counter() - started
    _write_result(args, argv, _render(args, obj, header, rows), wall_time)
    return 0


if __name__ == "__main__":
    sys.exit(main())
