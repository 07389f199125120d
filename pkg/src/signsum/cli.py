"""Command-line front end: ``signsum <command> [options]``.

Exit status: 0 when every executed check passes, 1 when a check fails,
2 on usage, parse or capacity errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from fractions import Fraction

from . import bounds, search, stopping
from .dist import (DEFAULT_CAPS, CapacityError, WeightParseError, WeightVector, Caps,
                   enumerate_naive, prob_in_interval, shifted_prob, tail_prob)
from .numerics import DomainError
from .report import SCHEMA_VERSION, VerificationReport, _jsonable, reports_to_csv
from .suite import CANONICAL_CLAIMS, EXTRA_CLAIMS, SuiteConfig, run_claims

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def default_seed() -> int:
    env = os.environ.get("SSL_SEED")
    if env is None:
        return search.DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SSL_SEED must be an integer, got {env!r}") from None


def _number(text: str):
    """Parse a CLI number as a Fraction when it is a plain rational."""
    try:
        return Fraction(text)
    except ValueError:
        return float(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--weights", metavar="PATH")
    common.add_argument("--engine", choices=["naive", "mim", "auto"], default="auto")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=["json", "csv", "text"], default=None)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--grid-step", type=float, default=1e-3)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--naive-cap", type=int, default=DEFAULT_CAPS.naive_n)
    common.add_argument("--mim-cap", type=int, default=DEFAULT_CAPS.mim_n)
    common.add_argument("--path-cap", type=int, default=DEFAULT_CAPS.path_n)

    parser = argparse.ArgumentParser(prog="signsum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", parents=[common], help="evaluate bound functions / run the analytic checks")
    p.add_argument("--eval", nargs="+", metavar=("FUNC", "ARG"),
                   help="FUNC in G, F, U, h, half_mix, H, L, Z, bd followed by its arguments")

    p = sub.add_parser("dist", parents=[common], help="exact distribution and interval probabilities")
    p.add_argument("--interval", nargs=2, metavar=("LO", "HI"))
    p.add_argument("--tail", metavar="T")
    p.add_argument("--shift", metavar="X")

    sub.add_parser("stopping", parents=[common], help="stopping-time certificate for one instance")

    p = sub.add_parser("verify", parents=[common], help="run verification claims")
    p.add_argument("--all", action="store_true", help="every canonical and extra claim")
    p.add_argument("--claim", action="append", default=[], choices=CANONICAL_CLAIMS + EXTRA_CLAIMS)
    p.add_argument("--records-csv", metavar="PATH", help="write per-trial margins of batch claims")

    p = sub.add_parser("search", parents=[common], help="local search for small P(|S| <= 1)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--steps", type=int, default=60)

    sub.add_parser("report", parents=[common], help="consolidated table of the canonical claims")
    return parser


def _caps(args) -> Caps:
    try:
        return Caps(args.naive_cap, args.mim_cap, args.path_cap)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def _load_weights(args) -> WeightVector:
    if not args.weights:
        raise UsageError("--weights PATH is required for this command")
    try:
        return WeightVector.load(args.weights)
    except OSError as exc:
        raise UsageError(f"cannot read {args.weights}: {exc.strerror}") from None


def _constant_header() -> str:
    rows = bounds.bound_table().rows()
    return "\n".join(f"# {k:<16} {v}" for k, v in rows)


def _envelope(command: str, seed: int, passed: bool, payload: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "seed": seed, "pass": passed,
            "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            **payload}


def _emit_reports(args, seed: int, reports: list[VerificationReport], fmt: str) -> str:
    passed = all(r.passed for r in reports)
    if fmt == "csv":
        return reports_to_csv(reports)
    if fmt == "text":
        lines = [_constant_header(), f"{'claim':<26} {'result':<6} margin"]
        for r in reports:
            tag = "PASS" if r.passed else "FAIL"
            if not r.applicable:
                tag = "SKIP"
            lines.append(f"{r.claim_id:<26} {tag:<6} {r.margin:.6g}")
        lines.append(f"{sum(r.passed for r in reports)}/{len(reports)} claims pass")
        return "\n".join(lines) + "\n"
    env = _envelope(args.command, seed, passed, {"claims": [r.to_dict() for r in reports]})
    return json.dumps(env, sort_keys=True, indent=2) + "\n"


def cmd_bounds(args, seed):
    if args.eval:
        name, *raw = args.eval
        funcs = {
            "G": (bounds.eval_G, 1), "F": (bounds.eval_F, 1), "U": (bounds.eval_U, 2),
            "h": (bounds.eval_h, 1), "half_mix": (bounds.eval_half_mix, 1), "H": (bounds.eval_H, 1),
            "L": (bounds.eval_L, 1), "Z": (bounds.eval_Z, 2), "bd": (bounds.bd_tail_bound, 1),
        }
        if name not in funcs:
            raise UsageError(f"unknown function {name!r}; choose from {', '.join(funcs)}")
        fn, arity = funcs[name]
        if len(raw) != arity:
            raise UsageError(f"{name} takes {arity} argument(s)")
        vals = [_number(x) for x in raw]
        if name in ("h", "half_mix") or (name == "U"):
            vals[0] = int(vals[0])
        if name in ("G", "H", "L", "Z", "bd"):
            vals = [float(v) for v in vals]
        value = fn(*vals)
        fmt = args.format or "text"
        if fmt == "json":
            out = json.dumps(_jsonable({"function": name, "args": raw, "value": value,
                                        "float_value": float(value)}), sort_keys=True) + "\n"
        elif fmt == "csv":
            out = f"function,args,value\n{name},{' '.join(raw)},{float(value)!r}\n"
        else:
            out = f"{float(value):.12g}\n"
        return out, EXIT_OK
    cfg = SuiteConfig(seed=seed, grid_step=args.grid_step)
    names = ["G_quarter_value", "F_quarter_value", "c_star_value", "corollary_2_7", "G_dominates_F",
             "h_k_ge_G_quarter", "half_mix_ge_G_quarter", "concavity_xi_3_4",
             "concavity_xi_minus_5_4", "endpoint_chain", "L_max_sqrt3"]
    reports = run_claims(names, cfg)
    return _emit_reports(args, seed, reports, args.format or "text"), _status(reports)


def _status(reports) -> int:
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_dist(args, seed):
    w = _load_weights(args)
    caps = _caps(args)
    fmt = args.format or "json"
    queries = {}
    if args.interval:
        lo, hi = (_number(x) for x in args.interval)
        queries["interval"] = prob_in_interval(w, lo, hi, args.engine, caps)
    if args.tail is not None:
        queries["tail"] = tail_prob(w, _number(args.tail), args.engine, caps)
    if args.shift is not None:
        queries["shift"] = shifted_prob(_number(args.shift), w, args.engine, caps)
    if fmt == "csv":
        return enumerate_naive(w, caps).to_csv(), EXIT_OK
    if not queries:
        queries["interval"] = prob_in_interval(w, -1, 1, args.engine, caps)
    if fmt == "text":
        lines = [_constant_header(), f"# n={w.n} mode={w.mode}"]
        for k, p in queries.items():
            lines.append(f"{k}: {p.numerator}/{p.denominator} = {p.float_value:.12g}"
                         + (f" (boundary-resolved: {p.boundary_count})" if p.boundary_count else ""))
        return "\n".join(lines) + "\n", EXIT_OK
    payload = {"n": w.n, "mode": w.mode, "norm_sq": w.norm_sq, "engine": args.engine,
               **{k: p.to_dict() for k, p in queries.items()}}
    return json.dumps(_jsonable(_envelope("dist", seed, True, payload)), sort_keys=True, indent=2) + "\n", EXIT_OK


def cmd_stopping(args, seed):
    w = _load_weights(args)
    cert = stopping.theorem_certificate(w, _caps(args))
    status = EXIT_OK if cert.passed else EXIT_FAIL
    fmt = args.format or "json"
    if fmt == "json":
        return json.dumps(_jsonable(cert.to_dict()), sort_keys=True, indent=2) + "\n", status
    if fmt == "csv":
        lines = ["T,count,cond_prob,bound,margin,case"]
        for t, r in cert.per_T.items():
            lines.append(f"{t},{r['count']},{r['cond_prob']!r},{r['bound']!r},{r['margin']!r},{r['case']}")
        return "\n".join(lines) + "\n", status
    lines = [_constant_header(), f"K = {cert.K}  n = {cert.n}  branch = {cert.branch}"]
    for t, r in cert.per_T.items():
        lines.append(f"T={t:<3} count={r['count']:<8} P(|S|<=1|T)={r['cond_prob']:.6f} "
                     f">= {r['bound']:.6f} ({r['case']})")
    lines.append(f"P(|S|<=1) = {cert.final_prob.float_value:.6f} >= {cert.final_bound:.6f} "
                 f">= G(1/4) = {cert.G_quarter:.6f}: {'PASS' if cert.passed else 'FAIL'}")
    return "\n".join(lines) + "\n", status


def cmd_verify(args, seed):
    names = list(CANONICAL_CLAIMS + EXTRA_CLAIMS) if args.all else list(args.claim)
    if not names:
        raise UsageError("give --all or at least one --claim")
    cfg = SuiteConfig(seed=seed, trials=args.trials, threads=args.threads, grid_step=args.grid_step)
    reports = run_claims(names, cfg)
    if args.records_csv:
        with open(args.records_csv, "w", encoding="utf-8") as fh:
            fh.write("claim_id,ordinal,margin\n")
            for r in reports:
                for rec in r.records:
                    if isinstance(rec, dict) and "margin" in rec:
                        fh.write(f"{r.claim_id},{rec.get('ordinal')},{rec['margin']!r}\n")
    return _emit_reports(args, seed, reports, args.format or "json"), _status(reports)


def cmd_search(args, seed):
    res = search.minimize_prob(args.n, args.restarts, seed, args.steps, threads=args.threads)
    gq = bounds.eval_G(0.25)
    ok = res.best_prob.fraction >= gq
    fmt = args.format or "json"
    if fmt == "text":
        return (f"{_constant_header()}\nn={args.n} best P(|S|<=1) = {res.best_prob.numerator}/"
                f"{res.best_prob.denominator} = {res.best_prob.float_value:.6f}\n"
                f"weights: {' '.join(f'{v:.6f}' for v in res.best_weights.weights)}\n"), \
            EXIT_OK if ok else EXIT_FAIL
    if fmt == "csv":
        return "index,weight\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(res.best_weights.weights)), \
            EXIT_OK if ok else EXIT_FAIL
    env = _envelope("search", seed, ok, {"result": res.to_dict(), "G_quarter": gq})
    return json.dumps(_jsonable(env), sort_keys=True, indent=2) + "\n", EXIT_OK if ok else EXIT_FAIL


def cmd_report(args, seed):
    cfg = SuiteConfig(seed=seed, trials=args.trials, threads=args.threads, grid_step=args.grid_step)
    reports = run_claims(CANONICAL_CLAIMS, cfg)
    return _emit_reports(args, seed, reports, args.format or "text"), _status(reports)


COMMANDS = {"bounds": cmd_bounds, "dist": cmd_dist, "stopping": cmd_stopping,
            "verify": cmd_verify, "search": cmd_search, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        seed = args.seed if args.seed is not None else default_seed()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        text, status = COMMANDS[args.command](args, seed)
    except (UsageError, WeightParseError, CapacityError, DomainError) as exc:
        print(f"signsum {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
