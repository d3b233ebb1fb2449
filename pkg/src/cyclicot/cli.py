"""Command-line entry point: ``cyclicot <command> ...``.

Exit codes: 0 success, 1 malformed input, 2 infeasible or over a size cap,
3 ``certify --expect optimal`` did not certify.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import ballantine, construct, diagnose, io
from .certify import certify, duality_gap
from .core import (CapExceededError, InfeasibleError, Plan, PotentialSet, TabulatedPotential,
                   validate_instance, validate_plan)
from .cost import build_tensor, plan_value
from .solve import exact_lp, round_to_feasible, sinkhorn_mm

EXIT_MALFORMED = 1
EXIT_INFEASIBLE = 2
EXIT_VERDICT = 3

log = logging.getLogger("cyclicot")


class _Malformed(Exception):
    pass


def parse_matrix(text: str) -> np.ndarray:
    """Row-major "a,b;c,d" into a 2-d array."""
    try:
        rows = [[float(v) for v in row.split(",")] for row in text.strip().split(";")]
    except ValueError as exc:
        raise _Malformed(f"bad matrix {text!r}: {exc}") from exc
    if len({len(r) for r in rows}) != 1:
        raise _Malformed(f"bad matrix {text!r}: ragged rows")
    return np.array(rows)


def _emit(obj, path) -> None:
    if path:
        io.write_json(obj, path)
    else:
        sys.stdout.write(io.dumps(obj) + "\n")


def _load_instance(path):
    inst = io.read_instance(path)
    problems = validate_instance(inst)
    if problems:
        raise _Malformed(f"{path}: " + "; ".join(problems))
    return inst


def _load_plan(path, inst) -> Plan:
    plan = io.read_plan(path, inst)
    problems = validate_plan(plan)
    if problems:
        raise _Malformed(f"{path}: " + "; ".join(problems))
    return plan


# gen

def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "regular":
        inst = construct.regular_instance(args.lam, args.grid, args.dim, jitter_seed=args.seed,
                                          m=args.m or 4, jitter=args.jitter)
        if args.package or args.plan or args.potentials:
            raise _Malformed("regular instances have no packaged plan or potentials")
        io.write_instance(inst, args.output)
        return 0
    if kind == "dirac":
        pkg = construct.dirac_example(args.radius, args.grid, args.dim)
    elif kind == "prop42":
        F = parse_matrix(args.F) if args.F else np.array([[0.0, -1.0], [1.0, 0.0]])
        pkg = construct.prop42_package(F, args.samples, args.seed, args.partners)
    else:
        pkg = construct.prop43_package(args.m or 5, args.samples, args.seed, args.partners)
    io.write_instance(pkg.instance, args.output)
    if args.package:
        io.write_json(io.package_to_dict(pkg), args.package)
    if args.plan:
        io.write_plan(pkg.plan, args.plan)
    if args.potentials:
        io.write_potentials(pkg.potentials, args.potentials)
    return 0


# solve

def cmd_solve(args) -> int:
    inst = _load_instance(args.input)
    if args.method == "lp":
        res = exact_lp(inst, args.objective)
        plan, duals = res.plan, res.duals
        meta = {"method": "lp", "objective": args.objective, "sense": res.sense,
                "value": res.value, "dual_value": res.dual_value, "iterations": res.iterations}
    else:
        T = build_tensor(inst, args.objective)
        eps = args.epsilon if args.epsilon is not None else 1e-3 * T.value_range
        res = sinkhorn_mm(inst, eps, objective=args.objective)
        plan = round_to_feasible(res.tensor, inst)
        duals = res.potentials
        value = float(np.sum(plan.to_dense() * T.values))
        meta = {"method": "sinkhorn", "objective": args.objective, "epsilon": eps,
                "value": value, "residual": res.residual, "converged": res.converged,
                "iterations": res.iterations}
    io.write_plan(plan, args.output)
    if args.duals:
        pots = PotentialSet(tuple(TabulatedPotential(u) for u in duals))
        io.write_potentials(pots, args.duals, extra=meta)
    log.info("objective %s = %.12g", args.objective, meta["value"])
    return 0


# certify

def cmd_certify(args) -> int:
    inst = _load_instance(args.input)
    plan = _load_plan(args.plan, inst)
    pots = io.read_potentials(args.potentials)
    if len(pots) != inst.m:
        raise _Malformed(f"{len(pots)} potentials for m={inst.m} marginals")
    grid = "supports" if args.check == "supports" else "grid"
    if grid == "grid" and not pots.is_closed_form:
        log.warning("tabulated potentials: checking on supports only")
        grid = "supports"
    cert = certify(plan, pots, inst, grid=grid, points_per_axis=args.points_per_axis,
                   enlarge=args.enlarge, tol=args.tol)
    _emit(cert.as_dict(), args.output)
    if args.expect == "optimal" and not cert.is_optimal:
        return EXIT_VERDICT
    return 0


# diagnose

def diagnostics(inst, plan, probe: int = 0, seed: int = 0, tol: float = 1e-6) -> dict:
    mon = diagnose.monge_test(plan)
    pts = diagnose.plan_support_points(plan)
    dim = diagnose.support_dimension(pts) if pts.shape[0] >= 10 else None
    out = {"is_monge": mon.is_monge, "split_mass": mon.split_mass, "support_dim": dim,
           "unique_verdict": None, "max_plan_distance": None}
    if probe > 0:
        rep = diagnose.uniqueness_probe(inst, probe, seed=seed, tol=tol)
        out["unique_verdict"] = rep.unique_verdict
        out["max_plan_distance"] = rep.max_plan_distance
    return out


def cmd_diagnose(args) -> int:
    inst = _load_instance(args.input)
    plan = _load_plan(args.plan, inst)
    _emit(diagnostics(inst, plan, args.probe, args.seed, args.tol), args.output)
    return 0


# ballantine

def cmd_ballantine(args) -> int:
    M = parse_matrix(args.matrix)
    if M.shape != (2, 2):
        raise _Malformed("ballantine commands need a 2x2 matrix")
    op = args.op
    if op in ("in-r2", "in-r3"):
        fn = ballantine.in_R2 if op == "in-r2" else ballantine.in_R3
        sys.stdout.write(("true" if fn(M) else "false") + "\n")
        return 0
    if op == "lemma41":
        C = ballantine.lemma41_singular_companion(M)
        _emit({"M": C, "det_F_plus_M": float(np.linalg.det(M + C)),
               "in_R2": ballantine.in_R2(C)}, None)
        return 0
    fac = ballantine.factor_pd2(M) if op == "factor2" else ballantine.factor_pd3(M, seed=args.seed)
    _emit({"factors": [P for P in fac.factors], "product_residual": fac.product_residual}, None)
    return 0


# report

REPORT_COLUMNS = ["instance_id", "m", "n", "objective", "gap", "split_mass", "support_dim"]


def cmd_report(args) -> int:
    if len(args.plan) != len(args.input):
        raise _Malformed("report needs one -p per -i")
    if args.potentials and len(args.potentials) != len(args.input):
        raise _Malformed("report needs one -u per -i when potentials are given")
    rows = []
    for j, (ipath, ppath) in enumerate(zip(args.input, args.plan)):
        inst = _load_instance(ipath)
        plan = _load_plan(ppath, inst)
        gap = ""
        if args.potentials:
            gap = io._fmt_float(duality_gap(plan, io.read_potentials(args.potentials[j])))
        diag = diagnostics(inst, plan)
        dim = "" if diag["support_dim"] is None else str(diag["support_dim"])
        rows.append([Path(ipath).stem, str(inst.m), str(inst.n),
                     io._fmt_float(plan_value(plan, "surplus")), gap,
                     io._fmt_float(diag["split_mass"]), dim])
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        writer.writerows(rows)
    finally:
        if args.output:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cyclicot",
                                description="Multi-marginal transport with cyclic quadratic cost.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance (and plan/potentials)")
    g.add_argument("kind", choices=["dirac", "prop42", "prop43", "regular"])
    g.add_argument("-o", "--output", required=True, help="instance JSON")
    g.add_argument("--package", help="full package JSON")
    g.add_argument("--plan", help="plan CSV")
    g.add_argument("--potentials", help="potentials JSON")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--F", help='linear map "a,b;c,d" (prop42)')
    g.add_argument("--samples", type=int, default=500)
    g.add_argument("--partners", type=int, default=2)
    g.add_argument("--m", type=int, default=None, help="number of marginals (prop43, regular)")
    g.add_argument("--grid", type=int, default=4, help="grid points per axis (dirac, regular)")
    g.add_argument("--dim", type=int, default=None, help="dimension n (dirac, regular)")
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--radius", type=float, default=1.0)
    g.add_argument("--jitter", type=float, default=0.0)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve the discrete problem")
    s.add_argument("method", choices=["lp", "sinkhorn"])
    s.add_argument("-i", "--input", required=True)
    s.add_argument("-o", "--output", required=True, help="plan CSV")
    s.add_argument("-e", "--epsilon", type=float, default=None)
    s.add_argument("--objective", choices=["surplus", "cost"], default="surplus")
    s.add_argument("--duals", help="duals/objective JSON")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="check a duality certificate")
    c.add_argument("-i", "--input", required=True)
    c.add_argument("-p", "--plan", required=True)
    c.add_argument("-u", "--potentials", required=True)
    c.add_argument("-o", "--output")
    c.add_argument("--check", choices=["supports", "grid"], default="grid")
    c.add_argument("--points-per-axis", type=int, default=8)
    c.add_argument("--enlarge", type=float, default=2.0)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--expect", choices=["optimal"])
    c.set_defaults(func=cmd_certify)

    d = sub.add_parser("diagnose", help="Monge test, support dimension, uniqueness probe")
    d.add_argument("-i", "--input", required=True)
    d.add_argument("-p", "--plan", required=True)
    d.add_argument("-o", "--output")
    d.add_argument("--probe", type=int, default=0, help="number of perturbed re-solves")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--tol", type=float, default=1e-6)
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("ballantine", help="2x2 positive-definite product tools")
    b.add_argument("op", choices=["in-r2", "in-r3", "factor2", "factor3", "lemma41"])
    b.add_argument("--matrix", required=True)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_ballantine)

    r = sub.add_parser("report", help="plot-ready CSV summary")
    r.add_argument("-i", "--input", action="append", required=True)
    r.add_argument("-p", "--plan", action="append", required=True)
    r.add_argument("-u", "--potentials", action="append")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_report)
    return p


def _attach_matrix_values(argv):
    # argparse reads "-1,3;0,-1" as an option; glue it to its flag instead
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--matrix", "--F"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_attach_matrix_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "dim", "unset") is None:
        args.dim = 2 if args.kind == "dirac" else 1
    try:
        return args.func(args)
    except (InfeasibleError, CapExceededError, ballantine.FactorizationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (_Malformed, io.FormatError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())
