"""Command-line entry point: ``rwextremes <subcommand> ...``."""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import experiments, feller, ssrw, valley
from .io import OUTPUT_DIR_ENV, dumps, read_path, resolve_output, rows_to_csv, write_text
from .stats import SCHEMA_VERSION
from .walk import WalkPath, order_statistics, parse_spec, sample_path, spec_to_dict

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3

CSV_HELP = f"""\
CSV output columns (--format csv):
  simulate                 x             one increment per line
  feller decompose         chain,index,value   chain is 'up' or 'down'
  feller recover           x
  feller riffle            segment,kind,index,value
  feller limit / limit     rep,k,w       W_k of the limit law, k = 1..K
  exact ssrw --op enumerate|wendel   value,probability   probability as a fraction
  valley mc                rep,u,k,m     k-th smallest valley value on the grid
  valley discretization    rep,difference
  verify                   experiment,check,value,target,tolerance,passed
  other commands           key,value

JSON output carries "schema": {SCHEMA_VERSION} and echoes the run configuration.
Relative --output paths are placed under ${OUTPUT_DIR_ENV} when it is set.
Exit codes: 0 success, 2 invalid input, 3 experiment outside tolerance.
"""


class CliError(Exception):
    pass


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a nonnegative integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format")
    common.add_argument("--output", help="write to this file instead of stdout")
    common.add_argument("--threads", type=_positive_int, help="cap on worker threads for compiled kernels")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, required=True, help="random seed (mandatory)")

    p = argparse.ArgumentParser(prog="rwextremes", description="Order statistics of random walks near their minimum.",
                                epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common, seeded], help="simulate one walk",
                       epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--spec", default="ssrw", help="ssrw | gaussian[:sigma[:mu]] | laplace[:b] | mixture:w*spec;...")
    s.add_argument("--n", type=_positive_int, required=True)

    f = sub.add_parser("feller", help="Feller-chain decomposition and recovery")
    fsub = f.add_subparsers(dest="action", required=True)
    for name, text in (("decompose", "split a path into its two chains"),
                       ("riffle", "split both chains into segments and riffle them back")):
        a = fsub.add_parser(name, parents=[common], help=text)
        a.add_argument("--input", required=True, help="path file (.csv with header x, or .json)")
    a = fsub.add_parser("recover", parents=[common], help="rebuild a path from a FellerPair JSON file")
    a.add_argument("--input", required=True)
    a = fsub.add_parser("limit", parents=[common, seeded], help="W_1..W_K of the limit law from one long walk")
    _limit_args(a)

    e = sub.add_parser("exact", help="exact results for the simple walk")
    esub = e.add_subparsers(dest="model", required=True)
    a = esub.add_parser("ssrw", parents=[common], help="closed forms and exhaustive enumeration")
    a.add_argument("--op", required=True, choices=("u", "ed", "cheb", "gf", "eta-gf", "enumerate", "wendel", "spitzer"))
    a.add_argument("--k", type=_nonneg_int)
    a.add_argument("--n", type=_nonneg_int)
    a.add_argument("--m", type=_nonneg_int)
    a.add_argument("--x", help="argument of V_k (number or fraction)")
    a.add_argument("--z", help="generating-function argument in (0, 1] (number or fraction)")
    a.add_argument("--stat", default="min", help="statistic for --op enumerate, e.g. min, order:2, gap:1")

    a = sub.add_parser("limit", parents=[common, seeded], help="replicated draws of W_1..W_K of the limit law")
    _limit_args(a)
    a.add_argument("--reps", type=_positive_int, default=1)

    v = sub.add_parser("valley", help="Brownian valley formulas and samplers")
    vsub = v.add_subparsers(dest="action", required=True)
    a = vsub.add_parser("tail", parents=[common], help="P(M_0 > a) from the product formula")
    a.add_argument("--a", type=_positive_float, required=True)
    a = vsub.add_parser("mean", parents=[common], help="mean of the valley minimum")
    a.add_argument("--tol", type=_positive_float, default=1e-3, help="requested accuracy")
    a.add_argument("--method", choices=("product", "mc"), default="product")
    a.add_argument("--reps", type=_positive_int, default=10**6, help="replicas for --method mc")
    a.add_argument("--seed", type=int, help="seed for --method mc")
    a = vsub.add_parser("mc", parents=[common, seeded], help="exact samples of M_0..M_K")
    a.add_argument("--k", type=_nonneg_int, default=0)
    a.add_argument("--horizon", type=_positive_int, default=10**6)
    a.add_argument("--reps", type=_positive_int, required=True)
    a = vsub.add_parser("discretization", parents=[common, seeded], help="walk minimum minus Brownian minimum")
    a.add_argument("--n", type=_positive_int, required=True)
    a.add_argument("--substeps", type=_positive_int, default=1000)
    a.add_argument("--reps", type=_positive_int, required=True)
    a.add_argument("--method", choices=("grid", "exact"), default="grid")

    a = sub.add_parser("verify", parents=[common], help="run a named acceptance experiment or 'all'",
                       epilog="experiments: " + ", ".join(experiments.REGISTRY))
    a.add_argument("name")
    a.add_argument("--seed", type=int, help=f"override the fixed seed {experiments.BASE_SEED}")
    a.add_argument("--n", type=_nonneg_int, help="size override for exact experiments")
    a.add_argument("--reps", type=_positive_int, help="replica override for Monte Carlo experiments")
    return p


def _limit_args(a: argparse.ArgumentParser) -> None:
    a.add_argument("--spec", default="gaussian")
    a.add_argument("--K", type=_positive_int, required=True)
    a.add_argument("--max-horizon", type=_positive_int, default=10**6)
    a.add_argument("--safety", type=_positive_float, default=4.0)


def _fraction(text: str | None, name: str):
    if text is None:
        raise CliError(f"--{name} is required for this operation")
    return Fraction(text)


def _need(value, name: str):
    if value is None:
        raise CliError(f"--{name} is required for this operation")
    return value


def _kv_rows(d: dict):
    return [[k, v] for k, v in d.items() if not isinstance(v, (dict, list))]


def _emit(args, payload: dict, csv_header: list[str] | None = None, csv_rows=None) -> None:
    if args.format == "csv":
        if csv_header is None:
            csv_header, csv_rows = ["key", "value"], _kv_rows(payload)
        text = rows_to_csv(csv_header, csv_rows)
    else:
        text = dumps({"schema": SCHEMA_VERSION, **payload}) + "\n"
    out = resolve_output(args.output)
    if out is None:
        sys.stdout.write(text)
    else:
        try:
            write_text(out, text)
        except OSError as exc:
            raise CliError(f"cannot write {out}: {exc}") from exc


def _config(args) -> dict:
    skip = {"format", "output", "threads"}
    return {k: v for k, v in vars(args).items() if k not in skip and v is not None}


def cmd_simulate(args) -> int:
    spec = parse_spec(args.spec)
    path = sample_path(spec, args.n, args.seed)
    os_ = order_statistics(path)
    payload = {"config": _config(args), "spec": spec_to_dict(spec), "increments": path.increments.tolist(),
               "min": os_.min.item(), "argmin_last": os_.argmin_last}
    _emit(args, payload, ["x"], [[v] for v in path.increments.tolist()])
    return EXIT_OK


def _load_pair(filename: str) -> feller.FellerPair:
    import json

    with open(filename) as fh:
        d = json.load(fh)
    pair = feller.FellerPair.from_chains(d["up"], d["down"])
    return pair


def cmd_feller(args) -> int:
    if args.action == "limit":
        res = feller.limit_order_stats(parse_spec(args.spec), args.K, args.max_horizon, args.safety, args.seed)
        _emit(args, {"config": _config(args), **res.to_dict()}, ["rep", "k", "w"],
              [[0, k + 1, float(w)] for k, w in enumerate(res.w)])
        return EXIT_OK
    if args.action == "recover":
        path = feller.recover_reverse_induction(_load_pair(args.input))
        _emit(args, {"config": _config(args), **path.to_dict()}, ["x"], [[v] for v in path.increments.tolist()])
        return EXIT_OK
    path = read_path(args.input)
    pair = feller.decompose(path)
    if args.action == "decompose":
        rows = [["up", i, v] for i, v in enumerate(pair.up.tolist())]
        rows += [["down", i, v] for i, v in enumerate(pair.down.tolist())]
        _emit(args, {"config": _config(args), **pair.to_dict()}, ["chain", "index", "value"], rows)
        return EXIT_OK
    asc, desc = feller.pair_segments(pair)
    rebuilt = feller.riffle_reconstruct(asc, desc)
    segs = [s.to_dict() for s in asc + desc]
    rows = [[j, s["kind"], i, v] for j, s in enumerate(segs) for i, v in enumerate(s["values"])]
    _emit(args, {"config": _config(args), "segments": segs, "increments": rebuilt.increments.tolist(),
                 "identical": rebuilt.same_as(path)}, ["segment", "kind", "index", "value"], rows)
    return EXIT_OK


def _value_str(v) -> str | float:
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def cmd_exact(args) -> int:
    op = args.op
    payload = {"config": _config(args), "op": op}
    if op == "u":
        payload["value"] = str(ssrw.central_term(_need(args.m if args.m is not None else args.k, "m")))
    elif op == "ed":
        k = _need(args.k, "k")
        if args.n is None:
            payload["value"] = str(ssrw.expected_gap_limit(k))
        else:
            payload["value"] = str(ssrw.enumerate_walks(args.n, f"gap:{k}").mean())
    elif op == "cheb":
        payload["value"] = _value_str(ssrw.chebyshev_v(_need(args.k, "k"), _fraction(args.x, "x")))
    elif op == "gf":
        payload["value"] = _value_str(ssrw.passage_gf(_need(args.k, "k"), _fraction(args.z, "z")))
    elif op == "eta-gf":
        payload["value"] = _value_str(ssrw.eta_gf(_need(args.k, "k"), _fraction(args.z, "z")))
    elif op == "spitzer":
        payload["value"] = str(ssrw.spitzer_expected_max(_need(args.n, "n")))
    else:
        if op == "enumerate":
            pmf = ssrw.enumerate_walks(_need(args.n, "n"), args.stat)
        else:
            pmf = ssrw.wendel_convolution(_need(args.k, "k"), _need(args.n, "n"))
        payload["pmf"] = pmf.to_dict()
        rows = [[str(k), str(v)] for k, v in sorted(pmf.mass.items(), key=lambda t: str(t[0]))]
        if args.format == "csv":
            _emit(args, payload, ["value", "probability"], rows)
            return EXIT_OK
    if args.format == "csv":
        _emit(args, payload, ["key", "value"], [["value", payload["value"]]])
    else:
        _emit(args, payload)
    return EXIT_OK


def cmd_limit(args) -> int:
    spec = parse_spec(args.spec)
    draws = [feller.limit_order_stats(spec, args.K, args.max_horizon, args.safety,
                                      args.seed if args.reps == 1 else hash_seed(args.seed, r))
             for r in range(args.reps)]
    rows = [[r, k + 1, float(w)] for r, d in enumerate(draws) for k, w in enumerate(d.w)]
    payload = {"config": _config(args), "w": [d.w.tolist() for d in draws],
               "certified": [d.certified for d in draws], "rule": draws[0].rule}
    _emit(args, payload, ["rep", "k", "w"], rows)
    return EXIT_OK


def hash_seed(seed: int, rep: int) -> int:
    """Per-replica seed derived through the counter-based generator."""
    from .walk import make_rng

    return int(make_rng(seed, rep).integers(2**62))


def cmd_valley(args) -> int:
    cfg = _config(args)
    if args.action == "tail":
        ev = valley.ValleyEvaluator()
        val = ev.tail(args.a)
        _emit(args, {"config": cfg, "value": val, "error_estimate": ev.quad_tol, "settings": _ev_settings(ev)})
    elif args.action == "mean":
        if args.method == "mc":
            if args.seed is None:
                raise CliError("--seed is required for --method mc")
            sample = valley.mc_valley_order_stats(0, 10**7, args.reps, args.seed)
            m0 = sample.m0
            _emit(args, {"config": cfg, "value": float(m0.mean()),
                         "error_estimate": float(m0.std(ddof=1) / np.sqrt(m0.size)),
                         "settings": {"reps": args.reps, "seed": args.seed}})
        else:
            ev = valley.ValleyEvaluator(quad_tol=min(1e-6, args.tol * 1e-3))
            val, err = ev.mean()
            _emit(args, {"config": cfg, "value": val, "error_estimate": err, "settings": _ev_settings(ev),
                         "zeta_reference": valley.zeta_mean_target()})
    elif args.action == "mc":
        s = valley.mc_valley_order_stats(args.k, args.horizon, args.reps, args.seed)
        rows = [[r, float(s.u[r]), k, float(s.order_stats[r, k])]
                for r in range(args.reps) for k in range(args.k + 1)]
        _emit(args, {"config": cfg, "u": s.u.tolist(), "order_stats": s.order_stats.tolist(),
                     "truncated": int(s.truncated.sum()),
                     "value": float(s.m0.mean()),
                     "error_estimate": float(s.m0.std(ddof=1) / np.sqrt(args.reps)) if args.reps > 1 else None,
                     "settings": {"k": args.k, "horizon": args.horizon, "reps": args.reps}},
              ["rep", "u", "k", "m"], rows)
    else:
        res = valley.discretization_experiment(args.n, args.substeps, args.reps, args.seed, method=args.method)
        d = res.difference
        _emit(args, {"config": cfg, "value": float(d.mean()),
                     "error_estimate": float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else None,
                     "differences": d.tolist(),
                     "settings": {"n": args.n, "substeps": args.substeps, "reps": args.reps, "method": args.method}},
              ["rep", "difference"], [[i, float(v)] for i, v in enumerate(d)])
    return EXIT_OK


def _ev_settings(ev: valley.ValleyEvaluator) -> dict:
    return {"product_depth": ev.product_depth, "product_tol": ev.product_tol, "quad_tol": ev.quad_tol,
            "series_order": ev.series_order}


def cmd_verify(args) -> int:
    if args.name == "all":
        exps = sorted(experiments.REGISTRY.values(), key=lambda e: e.number)
    else:
        try:
            exps = [experiments.lookup(args.name)]
        except KeyError as exc:
            raise CliError(str(exc)) from exc
    reports = []
    for e in exps:
        kwargs = {}
        if args.seed is not None:
            kwargs["seed"] = args.seed
        params = e.run.__code__.co_varnames[: e.run.__code__.co_argcount]
        if args.n is not None and "n" in params:
            kwargs["n"] = args.n
        if args.reps is not None and "reps" in params:
            kwargs["reps"] = args.reps
        rep = e.run(**kwargs)
        reports.append((e, rep))
        print(f"{'PASS' if rep.passed else 'FAIL'} [{e.number}] {e.name}", file=sys.stderr)
    rows = [[r.name, c.name, c.value if c.kind != "runtime" else "", c.target, c.tolerance, c.passed]
            for _, r in reports for c in r.checks]
    payload = {"experiments": [r.to_dict() for _, r in reports],
               "passed": all(r.passed for _, r in reports)}
    _emit(args, payload, ["experiment", "check", "value", "target", "tolerance", "passed"], rows)
    return EXIT_OK if payload["passed"] else EXIT_FAILED


COMMANDS = {"simulate": cmd_simulate, "feller": cmd_feller, "exact": cmd_exact, "limit": cmd_limit,
            "valley": cmd_valley, "verify": cmd_verify}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if args.threads:
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return COMMANDS[args.command](args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
