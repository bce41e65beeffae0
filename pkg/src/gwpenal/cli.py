"""Command-line front end.

Every subcommand prints its JSON report to stdout.  With ``--out DIR`` it
also writes ``<name>.json`` and, where a table exists, ``<name>.csv`` with a
fixed header.  Exit codes: 0 ok, 1 verification failed, 2 bad configuration
or domain error, 3 numeric non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import acceptance, martingales as mg, penalization as pen
from .errors import ConvergenceError, DomainError, GWError, ResourceCapError, VerificationError
from .jets import iterate_jets
from .limits import boettcher_K0, estimate_Cp, estimate_boettcher, laplace_transform
from .offspring import BOETTCHER, SCHROEDER, OffspringDistribution, characterize, load_distribution
from .spinelaw import SpineLaw, compare_shapes, sample_spine_tree, spine_statistics, verify_measure_equality
from .trees import format_typed_tree

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 1, 2, 3
DEFAULT_TOL = {"limits": 1e-6, "martingale": 1e-9, "penalize": 1e-6, "spine": 1e-8, "verify-all": None}

CSV_COLUMNS = {
    "jet": ["n", "s", "p", "derivative"],
    "limits": ["quantity", "p", "s_or_a", "estimate", "iterations", "residual"],
    "martingale": ["n", "mean"],
    "penalize": ["m", "ratio", "error"],
    "spine_stats": ["section", "key", "expected", "observed", "sigma"],
    "verify_all": ["criterion", "check", "passed", "detail"],
}


class ConfigError(GWError, ValueError):
    """A malformed command line or configuration value."""


# ---------------------------------------------------------------- helpers


def num(x):
    """JSON-safe rendering: rationals as strings, floats as floats."""
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def parse_number(text: str):
    """``"1/2"`` and integers stay exact; anything with a decimal point is a float."""
    try:
        if any(c in text for c in ".eE") and "/" not in text:
            return float(text)
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text: str) -> list:
    return [parse_number(t) for t in text.split(",") if t.strip()]


def load_q(args) -> OffspringDistribution:
    if not args.q:
        raise ConfigError("--q is required (a JSON file, inline JSON or a fixture name)")
    source = args.q
    if source in acceptance.FIXTURES and not Path(source).exists():
        q = acceptance.fixture(source)
    else:
        if not source.lstrip().startswith("{") and not Path(source).exists():
            raise ConfigError(f"no such distribution file: {source}")
        q = load_distribution(source)
    if args.mode == "float" and q.exact:
        q = OffspringDistribution.of([float(p) for p in q.probs], mode="float", degenerate=q.degenerate)
    elif args.mode == "exact" and not q.exact:
        raise ConfigError("a float distribution cannot be promoted to exact mode")
    return q


def emit(args, name: str, report: dict, rows=None):
    report = {"schema_version": SCHEMA_VERSION, "command": name, **report}
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n")
        if rows is not None:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(CSV_COLUMNS[name])
            writer.writerows(rows)
            (out / f"{name}.csv").write_text(buf.getvalue())


# ---------------------------------------------------------------- subcommands


def cmd_inspect(args) -> int:
    q = load_q(args)
    c = characterize(q)
    emit(args, "inspect", {
        "q": [num(p) for p in q.probs],
        "mode": q.mode,
        "mu": num(c.mu),
        "kappa": num(c.kappa),
        "a_min": c.a_min,
        "gamma": num(c.gamma),
        "regime": c.regime,
    })
    return EXIT_OK


def cmd_jet(args) -> int:
    q = load_q(args)
    s = parse_number(args.s)
    if not q.exact:
        s = float(s)
    rows = []
    for n, jet in enumerate(iterate_jets(q, args.n, s, args.order)):
        for p in range(args.order + 1):
            rows.append([n, num(s), p, num(jet.derivative(p))])
    emit(args, "jet", {"n": args.n, "s": num(s), "order": args.order,
                       "derivatives": [num(jet.derivative(p)) for p in range(args.order + 1)]}, rows)
    return EXIT_OK


def cmd_limits(args) -> int:
    q = load_q(args)
    c = characterize(q)
    rows, converged = [], True
    if c.regime in (SCHROEDER, BOETTCHER):
        L = laplace_transform(q, max(args.p, 1))
        for a in parse_list(args.a):
            a = float(a)
            values = L.derivatives(a, args.p)
            residual = L.schroeder_residual(a)
            for k, v in enumerate(values):
                rows.append(["phi_derivative", k, a, v, "", residual])
    for s in parse_list(args.s):
        s = float(s)
        if c.regime == BOETTCHER:
            if s <= 0:
                continue
            b, K = estimate_boettcher(q, args.p, s, tol=args.tol)
            rows.append(["b", 0, s, b.value, b.iterations, ""])
            rows.append(["K_p", args.p, s, K.value, K.iterations, K.last_gap])
            converged &= K.converged
        elif args.p >= 1 and s < 1:
            est = estimate_Cp(q, args.p, s, tol=args.tol)
            rows.append([est.kind, args.p, s, est.value, est.iterations, est.last_gap])
            converged &= est.converged
    if c.regime == BOETTCHER:
        rows.append(["K_0", 0, "", boettcher_K0(q), "", ""])
    emit(args, "limits", {"regime": c.regime, "converged": converged,
                          "rows": [dict(zip(CSV_COLUMNS["limits"], r)) for r in rows]}, rows)
    return EXIT_OK if converged else EXIT_CONVERGENCE


def cmd_martingale(args) -> int:
    q = load_q(args)
    a = parse_number(args.a)
    M = mg.MartingaleSpec(args.spec, q, p=args.p, a=a, n0=args.n0, fixed_point=args.fixed_point)
    rep = mg.verify_martingale(M, n_max=args.nmax, tol=args.tol)
    body = rep.to_json()
    rows = [[n, num(v)] for n, v in rep.means]
    emit(args, "martingale", {"spec": M.label(), "report": body}, rows)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_penalize(args) -> int:
    q = load_q(args)
    problem = pen.PenalizationProblem(q, pen.parse_weight(args.weight), pen.parse_event(args.event), args.n)
    schedule = tuple(m for m in pen.default_schedule(problem) if m <= args.mmax) or (args.mmax,)
    res = pen.limit_ratio(problem, schedule, tol=args.tol)
    rows = [[m, num(r), num(e)] for m, r, e in res.table]
    emit(args, "penalize", {
        "limit": num(res.limit),
        "martingale": res.martingale.label(),
        "theorem": res.theorem,
        "converged": res.converged,
        "final_error": float(res.table[-1][2]),
    }, rows)
    return EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_spine(args) -> int:
    q = load_q(args)
    law = SpineLaw(q, args.p, parse_number(args.a), args.n0)
    if args.action == "sample":
        trees = [format_typed_tree(sample_spine_tree(law, args.n0 + args.height, args.seed + i))
                 for i in range(args.count)]
        for t in trees:
            print(t)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "spine_sample.txt").write_text("".join(t + "\n" for t in trees))
        return EXIT_OK
    if args.action == "verify":
        rep = verify_measure_equality(law, args.n, args.maxk, tol=args.tol)
        emit(args, "spine_verify", rep.to_json())
        return EXIT_OK if rep.passed else EXIT_VERIFY
    stats = spine_statistics(law, args.n0 + args.height, args.samples, args.seed)
    checks = compare_shapes(stats, law) if args.height >= 2 else []
    rows = [["shape", " ".join(map(str, c.key)), c.expected, c.observed, c.sigma] for c in checks]
    for g, mean in enumerate(stats.z.mean(axis=0).tolist()):
        rows.append(["mean_z", g, "", mean, ""])
    passed = stats.mass_conserved() and all(c.passed for c in checks)
    emit(args, "spine_stats", {"samples": args.samples, "seed": args.seed,
                               "mass_conserved": stats.mass_conserved(),
                               "shapes_within_3_sigma": all(c.passed for c in checks),
                               "passed": passed}, rows)
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_verify_all(args) -> int:
    results = acceptance.run_all(args.only)
    rows = [[r.number, c.name, c.passed, c.detail] for r in results for c in r.checks]
    for r in results:
        print(r.line(), file=sys.stderr)
    ok = all(r.passed for r in results)
    emit(args, "verify_all", {"passed": ok, "criteria": [r.to_json() for r in results]}, rows)
    if not ok and args.out:
        print(f"report: {Path(args.out) / 'verify_all.json'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q", help="distribution JSON file, inline JSON, or a shipped fixture name")
    common.add_argument("--mode", choices=("exact", "float"), help="numeric mode override")
    common.add_argument("--tol", type=float, help="tolerance (per-command default)")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--out", help="directory for JSON/CSV artifacts")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gwpenal", description="Penalization of Galton-Watson processes")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("inspect", parents=[common], help="mean, extinction probability, regime").set_defaults(func=cmd_inspect)

    p = sub.add_parser("jet", parents=[common], help="derivatives of f_n at s")
    p.add_argument("--s", default="1/2")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--order", type=int, default=2)
    p.set_defaults(func=cmd_jet)

    p = sub.add_parser("limits", parents=[common], help="phi derivatives and derivative-ratio limits")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--a", default="0,0.5,1", help="comma-separated Laplace arguments")
    p.add_argument("--s", default="0.5", help="comma-separated generating-function arguments")
    p.set_defaults(func=cmd_limits)

    p = sub.add_parser("martingale", parents=[common], help="verify one martingale family")
    p.add_argument("--spec", required=True, choices=mg.SPEC_NAMES)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--a", default="0")
    p.add_argument("--n0", type=int, default=0)
    p.add_argument("--fixed-point", choices=("smallest", "second"), default="smallest")
    p.add_argument("--nmax", type=int, default=4)
    p.set_defaults(func=cmd_martingale)

    p = sub.add_parser("penalize", parents=[common], help="penalization ratio and its limit")
    p.add_argument("--weight", required=True, help="geom:p=1,s=0.5 or laplace:p=2,a=1.0")
    p.add_argument("--event", default="all", help="all, z_eq:K, z_in:a,b, z_le:K")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--mmax", type=int, default=200)
    p.set_defaults(func=cmd_penalize)

    p = sub.add_parser("spine", parents=[common], help="multi-type spine tree law")
    p.add_argument("action", choices=("sample", "verify", "stats"))
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--a", default="0")
    p.add_argument("--n0", type=int, default=0)
    p.add_argument("--height", type=int, default=6, help="levels below the root")
    p.add_argument("--count", type=int, default=1, help="trees to sample")
    p.add_argument("--samples", type=int, default=100_000, help="batch size for stats")
    p.add_argument("--n", type=int, default=2, help="verification height")
    p.add_argument("--maxk", type=int, default=3, help="max children in verification")
    p.set_defaults(func=cmd_spine)

    p = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    p.set_defaults(func=cmd_verify_all)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.tol is None:
        args.tol = DEFAULT_TOL.get(args.command)
    elif not 0 < args.tol < 1:
        print("error: --tol must lie in (0, 1)", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(f"diagnostics: {exc.diagnostics}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DomainError, ResourceCapError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
