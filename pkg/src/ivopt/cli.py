"""Command-line interface.

Exit codes: 0 pass, 1 refuted or fails, 2 input error, 3 internal
disagreement between independent checks, 4 inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
import warnings

import numpy as np

from . import expr as E
from .certify import SolutionKind, certify_on_set, certify_via_biobjective, membership_table
from .errors import IvoptError
from .existence import descend_to_elu, ekeland_quasi, lu_bounded_below
from .kkt import (
    Status,
    candidate_elu_witness,
    quasi_kkt_residual,
    quasi_sufficiency_check,
    scalar_eps_solution_check,
    search_weak_elu_witness,
    verify_elu_kkt,
    verify_weak_elu_kkt,
)
from .problem import Epsilon, SampleSet, feasible_mask, load_problem
from .scalarize import bridge_to_weak_elu, frontier_csv, frontier_sweep, weighted_objective, weighted_sum_solve

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_DISAGREE, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.12g}"


def fmt_vec(v) -> str:
    return "(" + ", ".join(fmt(a) for a in np.atleast_1d(v)) + ")"


def parse_vector(text: str, n: int) -> np.ndarray:
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise InputError(f"cannot parse point {text!r}") from None
    if v.size != n:
        raise InputError(f"point {text!r} has {v.size} coordinates, problem has {n}")
    return v


def parse_samples(text: str, n: int) -> SampleSet:
    kind, _, body = text.partition(":")
    if kind == "grid":
        parts = body.split(",")
        if len(parts) != 3:
            raise InputError("expected --samples grid:lo,hi,steps")
        try:
            return SampleSet.grid(float(parts[0]), float(parts[1]), int(parts[2]), n)
        except ValueError as exc:
            raise InputError(f"bad grid: {exc}") from None
    if kind == "file":
        return SampleSet.from_file(body, n)
    raise InputError(f"unknown sample descriptor {text!r}")


def read_points_csv(path: str, n: int):
    """Points (and per-row tolerances when epsL/epsU columns exist) from a CSV with header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    cols = [f"x{i + 1}" for i in range(n)]
    if rows and any(c not in rows[0] for c in cols):
        raise InputError(f"{path}: expected columns {', '.join(cols)}")
    points, epss = [], []
    for r in rows:
        points.append(np.array([float(r[c]) for c in cols]))
        epss.append(Epsilon(float(r["epsL"]), float(r["epsU"])) if "epsL" in r and "epsU" in r else None)
    return points, epss


class Context:
    def __init__(self, args):
        self.args = args
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            self.file = load_problem(args.problem)
        self.warnings = [str(w.message) for w in caught]
        self.p = self.file.problem
        self.eps = Epsilon.parse(args.eps) if args.eps else self.file.epsilon
        self.samples = parse_samples(args.samples, self.p.n) if args.samples else self.file.samples
        self.lines: list[str] = []

    def out(self, line: str = "") -> None:
        self.lines.append(line)

    def need_eps(self) -> Epsilon:
        if self.eps is None:
            raise InputError("no tolerance given; use --eps LO,HI or an [epsilon] section")
        return self.eps

    def need_samples(self) -> SampleSet:
        if self.samples is None:
            raise InputError("no sample set; use --samples or a [samples] section")
        return self.samples

    def points(self):
        a = self.args
        if getattr(a, "points_csv", None):
            return read_points_csv(a.points_csv, self.p.n)
        if a.point:
            return [parse_vector(s, self.p.n) for s in a.point], [None] * len(a.point)
        return [], []

    def header(self, command: str) -> None:
        self.out(f"command: {command}")
        self.out(f"problem: {self.p.name} (n = {self.p.n}, m = {self.p.m})")
        for w in self.warnings:
            self.out(f"warning: {w}")
        if self.samples is not None:
            self.out(f"SAMPLED REGION: {self.samples.descriptor}")
            self.out("all sample-based verdicts are relative to this region")
        if self.eps is not None:
            self.out(f"E: {self.eps}")
        self.out()


def cmd_check(ctx: Context) -> int:
    a = ctx.args
    S = ctx.need_samples()
    kind = SolutionKind(a.kind)
    points, epss = ctx.points()
    if not points:
        raise InputError("check needs --point or --points-csv")
    ctx.header("check")
    code = EXIT_PASS
    for x, row_eps in zip(points, epss):
        eps = ctx.eps if a.eps else (row_eps or ctx.eps)
        if kind.uses_eps and eps is None:
            raise InputError("no tolerance given; use --eps LO,HI or an [epsilon] section")
        c1 = certify_on_set(kind, ctx.p, x, eps, S, a.tol)
        c2 = certify_via_biobjective(kind, ctx.p, x, eps, S, a.tol)
        ctx.out(c1.report())
        ctx.out(f"biobjective route: {c2.verdict.value}" + ("" if c2.passed else f" by #{c2.refuter_index}"))
        if c1.verdict != c2.verdict or c1.refuter_index != c2.refuter_index:
            ctx.out("INTERNAL DISAGREEMENT between the interval and biobjective routes")
            code = EXIT_DISAGREE
        elif not c1.passed and code == EXIT_PASS:
            code = EXIT_FAIL
        ctx.out()
    return code


def cmd_descend(ctx: Context) -> int:
    a = ctx.args
    S, eps = ctx.need_samples(), ctx.need_eps()
    x0 = parse_vector(a.point[0], ctx.p.n) if a.point else None
    ctx.header("descend")
    bound = lu_bounded_below(ctx.p, S)
    ctx.out(f"empirical LU lower bound on sample: {bound.bound}")
    x, trace = descend_to_elu(ctx.p, S, x0, eps, lower_bound=a.lower_bound)
    for k, (pt, v) in enumerate(zip(trace.points, trace.values)):
        ctx.out(f"step {k}: x = {fmt_vec(pt)}, f = {v}")
    ctx.out(f"moves: {trace.steps}")
    if trace.iteration_bound is not None:
        ctx.out(f"iteration bound: {trace.iteration_bound}")
    ctx.out(f"termination: {trace.reason}")
    ctx.out(f"x*: {fmt_vec(x)}")
    ctx.out(f"sublevel-set certificate: {trace.sublevel_certificate.verdict.value}")
    ctx.out(f"full-set certificate: {trace.full_certificate.verdict.value}")
    if a.csv:
        with open(a.csv, "w", encoding="utf-8") as fh:
            fh.write(trace.to_csv())
    ok = trace.full_certificate.passed and trace.sublevel_certificate.passed
    if trace.iteration_bound is not None and trace.steps > trace.iteration_bound:
        ok = False
    return EXIT_PASS if ok else EXIT_DISAGREE


def cmd_ekeland(ctx: Context) -> int:
    a = ctx.args
    S, eps = ctx.need_samples(), ctx.need_eps()
    x0 = parse_vector(a.point[0], ctx.p.n) if a.point else None
    ctx.header("ekeland")
    x, trace = ekeland_quasi(ctx.p, S, eps, x0, warm_start=a.warm_start, return_trace=True)
    for k, (pt, v) in enumerate(zip(trace.points, trace.values)):
        ctx.out(f"step {k}: x = {fmt_vec(pt)}, f = {v}")
    ctx.out(f"x*: {fmt_vec(x)}")
    ctx.out(f"E-quasi-LU certificate: {trace.full_certificate.verdict.value}")
    if a.csv:
        with open(a.csv, "w", encoding="utf-8") as fh:
            fh.write(trace.to_csv())
    return EXIT_PASS if trace.full_certificate.passed else EXIT_DISAGREE


def cmd_kkt(ctx: Context) -> int:
    a = ctx.args
    if not a.point:
        raise InputError("kkt needs --point")
    x = parse_vector(a.point[0], ctx.p.n)
    eps = ctx.need_eps()
    ctx.header(f"kkt --theorem {a.theorem}")
    tol = a.tol if a.tol_given else None
    if a.theorem == "weak":
        w = search_weak_elu_witness(ctx.p, x, eps, resolution=a.resolution, assume_slater=a.assume_slater, seed=a.seed)
        if w is None:
            ctx.out("no witness found at this resolution (inconclusive)")
            return EXIT_INCONCLUSIVE
        report = verify_weak_elu_kkt(ctx.p, x, eps, w, assume_slater=a.assume_slater, seed=a.seed)
    elif a.theorem == "elu":
        if not a.assume_cc:
            raise InputError("the E-LU theorem needs --assume-cc (closedness condition is not verified)")
        w = candidate_elu_witness(ctx.p, x, eps)
        if w is None:
            ctx.out("no candidate witness (inconclusive)")
            return EXIT_INCONCLUSIVE
        report = verify_elu_kkt(ctx.p, x, eps, w, assume_cc=True, samples=ctx.samples)
        report.notes.append("conclusion conditional on the asserted closedness condition")
    elif a.theorem == "quasi":
        strict = E.certify_convexity(ctx.p.fL).strictly_convex and E.certify_convexity(ctx.p.fU).strictly_convex
        if strict:
            report = quasi_sufficiency_check(ctx.p, x, eps, samples=ctx.samples, **({"tol": tol} if tol else {}))
        else:
            _, _, report = quasi_kkt_residual(ctx.p, x, eps, **({"tol": tol} if tol else {}))
            report.notes.append("fL, fU not both certified strictly convex: necessity only")
    else:
        mu = a.weight
        phi = weighted_objective(ctx.p, mu)
        s = a.scalar_eps if a.scalar_eps is not None else mu * eps.hi + (1 - mu) * eps.lo
        ctx.out(f"phi = {fmt(mu)} fL + {fmt(1 - mu)} fU, eps = {fmt(s)}")
        report = scalar_eps_solution_check(phi, ctx.p, x, s, assume_slater=a.assume_slater, seed=a.seed)
    ctx.out(f"x*: {fmt_vec(x)}")
    ctx.out(report.text())
    return {Status.HOLDS: EXIT_PASS, Status.FAILS: EXIT_FAIL, Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}[report.status]


def cmd_scalarize(ctx: Context) -> int:
    a = ctx.args
    x0 = parse_vector(a.point[0], ctx.p.n) if a.point else None
    ctx.header("scalarize")
    res = weighted_sum_solve(ctx.p, a.weight, budget=a.budget, x0=x0, samples=ctx.samples)
    ctx.out(f"weight muL: {fmt(a.weight)}")
    ctx.out(f"x: {fmt_vec(res.x)}")
    ctx.out(f"objective: {fmt(res.value)}")
    ctx.out(f"gap: {fmt(res.gap)} ({res.gap_note})")
    ctx.out(f"penalty weight: {fmt(res.rho)}")
    for e in bridge_to_weak_elu(ctx.p, res.x, a.weight, res.gap, gap=res.gap):
        ctx.out(f"weakly E-LU for E = {e}")
    return EXIT_PASS


def cmd_frontier(ctx: Context) -> int:
    a = ctx.args
    ctx.header("frontier")
    weights = np.linspace(0.0, 1.0, a.weights)
    pts = frontier_sweep(ctx.p, weights, budget=a.budget, samples=ctx.samples)
    text = frontier_csv(pts, ctx.p.n)
    for line in text.splitlines():
        ctx.out(line)
    for fp in pts:
        if fp.error:
            ctx.out(f"weight {fmt(fp.muL)} failed: {fp.error}")
    if a.csv:
        with open(a.csv, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_FAIL if all(fp.x is None for fp in pts) else EXIT_PASS


def cmd_oracle(ctx: Context) -> int:
    a = ctx.args
    S, eps = ctx.need_samples(), ctx.need_eps()
    points, _ = ctx.points()
    if not points:
        points = list(S.points[feasible_mask(ctx.p, S.points)])
    ctx.header("oracle")
    kinds = list(SolutionKind)
    ctx.out(",".join([f"x{i + 1}" for i in range(ctx.p.n)] + [k.value for k in kinds]))
    code = EXIT_PASS
    for x, certs in membership_table(ctx.p, points, eps, S, a.tol):
        ctx.out(",".join([fmt(v) for v in x] + ["pass" if certs[k].passed else "refuted" for k in kinds]))
        for strong, weak in [
            (SolutionKind.LU, SolutionKind.WEAK_LU),
            (SolutionKind.ELU, SolutionKind.WEAK_ELU),
            (SolutionKind.EQUASI_LU, SolutionKind.WEAK_EQUASI_LU),
        ]:
            if certs[strong].passed and not certs[weak].passed:
                ctx.out(f"INCLUSION VIOLATED at {fmt_vec(x)}: {strong.label} but not {weak.label}")
                code = EXIT_DISAGREE
    return code


COMMANDS = {
    "check": cmd_check,
    "descend": cmd_descend,
    "ekeland": cmd_ekeland,
    "kkt": cmd_kkt,
    "scalarize": cmd_scalarize,
    "frontier": cmd_frontier,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, help="problem file")
    common.add_argument("--eps", help="tolerance interval LO,HI")
    common.add_argument("--samples", help="sample override: grid:lo,hi,steps or file:PATH")
    common.add_argument("--point", action="append", help="point v1,v2,... (repeatable for check/oracle)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None, help="violation or KKT tolerance")
    common.add_argument("--assume-cc", action="store_true", help="assert the closedness condition")
    common.add_argument("--assume-slater", action="store_true", help="assert a Slater point exists")
    common.add_argument("--out", help="also write the report to this file")

    parser = argparse.ArgumentParser(prog="ivopt", description="Approximate solutions of interval-valued programs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="certify a point for one solution kind")
    p.add_argument("--kind", required=True, choices=[k.value for k in SolutionKind])
    p.add_argument("--points-csv", help="CSV with columns x1..xn (and optional epsL, epsU)")

    p = sub.add_parser("descend", parents=[common], help="descent to an E-LU solution")
    p.add_argument("--lower-bound", type=float, default=None, help="known lower bound on fL")
    p.add_argument("--csv", help="write the trace as CSV")

    p = sub.add_parser("ekeland", parents=[common], help="finite Ekeland selection of an E-quasi-LU solution")
    p.add_argument("--warm-start", action="store_true")
    p.add_argument("--csv", help="write the trace as CSV")

    p = sub.add_parser("kkt", parents=[common], help="approximate KKT certification")
    p.add_argument("--theorem", choices=["weak", "elu", "quasi", "scalar"], default="weak")
    p.add_argument("--resolution", type=float, default=0.05, help="weight grid step for the witness search")
    p.add_argument("--weight", type=float, default=0.5, help="muL for --theorem scalar")
    p.add_argument("--scalar-eps", type=float, default=None)

    p = sub.add_parser("scalarize", parents=[common], help="weighted-sum solve and bridge")
    p.add_argument("--weight", type=float, default=0.5)
    p.add_argument("--budget", type=int, default=10_000)

    p = sub.add_parser("frontier", parents=[common], help="weighted-sum frontier sweep")
    p.add_argument("--weights", type=int, default=11, help="number of evenly spaced weights in [0, 1]")
    p.add_argument("--budget", type=int, default=10_000)
    p.add_argument("--csv", help="write the frontier as CSV")

    p = sub.add_parser("oracle", parents=[common], help="grid verdicts of all six kinds")
    p.add_argument("--points-csv", help="CSV with columns x1..xn")
    return parser


_NUMERIC_LIST = re.compile(r"^-[\d.]")
_VALUE_FLAGS = ("--point", "--eps", "--lower-bound")


def _attach_negative_values(argv):
    """Rewrite ``--point -1,2`` as ``--point=-1,2`` so argparse does not read a flag."""
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is not None and _NUMERIC_LIST.match(nxt):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_attach_negative_values(argv))
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    args.tol_given = args.tol is not None
    if args.tol is None:
        args.tol = 1e-10
    elif args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        ctx = Context(args)
        code = COMMANDS[args.command](ctx)
    except (InputError, IvoptError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report = "\n".join(ctx.lines) + "\n"
    sys.stdout.write(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    return code


if __name__ == "__main__":
    sys.exit(main())
