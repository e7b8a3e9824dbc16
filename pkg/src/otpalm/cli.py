"""Command-line front end: ``gen | solve | bench | export-socp | check``.

Exit codes: 0 success, 1 failed check, 2 bad flags or unreadable input,
3 time limit hit with ``--strict``, 4 degenerate SOCP with ``--require-cones``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import instance_io, socp
from .admm import AdmmConfig
from .auglag import feasibility
from .cipalm import Relative, SolverConfig, Status, snipal_policy, solve
from .errors import InstanceFormatError, OTPalmError, TooLarge
from .instances import (ClassicalSpec, GroupDASpec, MartingaleSpec, gen_classical, gen_group_da,
                        gen_martingale)
from .model import primal_objective, validate

RHO_SWEEP = (8e-1, 4e-1, 1e-1, 8e-2, 4e-2, 1e-2, 8e-3, 4e-3, 1e-3, 8e-4)
GRID_C0 = (1.0, 1e-3)
GRID_PQ = (1.1, 2.1, 3.1)


@dataclasses.dataclass
class RunRecord:
    instance: str
    m: int
    n: int
    preset: str
    lambda1: float
    lambda2: float
    policy: str
    correction: bool
    outer: int
    lin: int
    time: float
    eta: float
    eta_X: float
    eta_y: float
    eta_z: float
    eta_feas: float
    eta_gap: float
    pobj: float
    dobj: float
    nobj: float | None
    feas: float
    status: str

    @classmethod
    def fields(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def threads() -> int:
    try:
        return max(1, int(os.environ.get("OTPALM_THREADS", "1")))
    except ValueError:
        return 1


def make_policy(name: str, rho=0.01, eps0=1.0, delta0=1.0, p=1.1, q=1.1):
    if name == "relative":
        return Relative(rho)
    kind = {"absA": "A", "absB": "B", "absAB": "AB"}[name]
    return snipal_policy(eps0, p, delta0, q, kind)


def nobj(pobj: float, ref: float | None):
    if ref is None:
        return None
    return abs(pobj - ref) / (1.0 + abs(ref))


def run_record(pd, rep, inst_id: str, policy_desc: str, correction: bool, ref=None) -> RunRecord:
    r = rep.residuals
    return RunRecord(inst_id, pd.m, pd.n, pd.constraints.preset.value, pd.reg.lambda1, pd.reg.lambda2,
                     policy_desc, correction, rep.outer_iters, rep.linear_systems_solved, rep.time,
                     r.eta, r.eta_X, r.eta_y, r.eta_z, r.eta_feas, r.eta_gap, r.pobj, r.dobj,
                     nobj(r.pobj, ref), feasibility(pd, rep.primal), rep.status.value)


def append_csv(path, rows: list[dict], fieldnames: list[str]) -> None:
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        if new:
            w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})


def _load(path):
    try:
        return instance_io.read_instance(path)
    except OSError as exc:
        raise InstanceFormatError(f"cannot read {path}: {exc}") from exc


# subcommands

def cmd_gen(args) -> int:
    fam = args.family
    if fam == "classical":
        pd = gen_classical(ClassicalSpec(args.m, args.n, args.seed))
    elif fam == "martingale":
        pd = gen_martingale(MartingaleSpec(args.m, args.n_prime or args.n, args.seed))
    else:
        pd = gen_group_da(GroupDASpec(args.m, args.n, args.m1, args.lambda1, args.lambda2, args.seed, args.omega))
    problems = validate(pd)
    if problems:
        print("invalid instance: " + ", ".join(problems), file=sys.stderr)
        return 1
    instance_io.write_instance(pd, args.output)
    print(json.dumps(dict(file=args.output, family=fam, m=pd.m, n=pd.n, preset=pd.constraints.preset.value,
                          seed=args.seed, groups=pd.reg.partition.n_groups, id=instance_io.digest(pd))))
    return 0


def _solver_config(args, policy, correction=True):
    return SolverConfig(policy=policy, tol=args.tol, maxiter=args.maxiter,
                        max_time=args.maxtime_sec if args.maxtime_sec else math.inf,
                        apply_correction=correction,
                        warm_start=None if args.no_warm_start else AdmmConfig())


def _reference(pd, args):
    if args.ref_obj is not None:
        return args.ref_obj
    if args.ref_oracle:
        return _oracle(pd)[2]
    return None


def _oracle(pd):
    from .oracles import lp_oracle, reg_oracle

    if pd.reg.lambda2 > 0:
        return ("reg_oracle",) + reg_oracle(pd)
    if pd.reg.lambda1 == 0:
        return ("lp_oracle",) + lp_oracle(pd)
    raise TooLarge("no reference oracle for lambda1 > 0 with lambda2 = 0")


def cmd_solve(args) -> int:
    pd = _load(args.instance)
    policy = make_policy(args.policy, args.rho, args.eps0, args.delta0, args.p, args.q)
    correction = not args.no_correction
    rep = solve(pd, _solver_config(args, policy, correction))
    desc = policy.describe() + ("" if correction else "+nocorr")
    rec = run_record(pd, rep, instance_io.digest(pd), desc, correction, _reference(pd, args))
    print(json.dumps(rec.as_dict()))
    if args.csv:
        append_csv(args.csv, [rec.as_dict()], RunRecord.fields())
    if args.dump_solution:
        sol = dict(X=rep.primal.X.tolist(), y=rep.primal.y.tolist(), z=rep.primal.z.tolist(),
                   W=rep.dual.W.tolist(), u=rep.dual.u.tolist(), v=rep.dual.v.tolist(),
                   pobj=rec.pobj, dobj=rec.dobj, eta=rec.eta, status=rec.status)
        with open(args.dump_solution, "w") as fh:
            json.dump(sol, fh)
    if args.strict and rep.status is Status.TIMEOUT:
        return 3
    return 0


def bench_configs(sweep: str):
    """Sweep rows in a fixed order: ``(sweep, index, params)``."""
    rows = []
    if sweep in ("rho", "both"):
        rows += [("rho", i, dict(rho=r)) for i, r in enumerate(RHO_SWEEP)]
    if sweep in ("grid", "both"):
        k = 0
        for c0 in GRID_C0:
            for p in GRID_PQ:
                for q in GRID_PQ:
                    rows.append(("grid", k, dict(eps0=c0, delta0=c0, p=p, q=q)))
                    k += 1
    return rows


BENCH_PREFIX = ["sweep", "index", "rho", "eps0", "delta0", "p", "q"]


def _bench_one(job):
    path, sweep, idx, prm, tol, maxiter, max_time = job
    pd = instance_io.read_instance(path)
    if sweep == "rho":
        policy, correction = Relative(prm["rho"]), True
    else:
        policy, correction = snipal_policy(prm["eps0"], prm["p"], prm["delta0"], prm["q"], "AB"), False
    cfg = SolverConfig(policy=policy, tol=tol, maxiter=maxiter, max_time=max_time,
                       apply_correction=correction, warm_start=AdmmConfig())
    rep = solve(pd, cfg)
    desc = policy.describe() + ("" if correction else "+nocorr")
    rec = run_record(pd, rep, instance_io.digest(pd), desc, correction)
    row = dict(sweep=sweep, index=idx, rho=prm.get("rho"), eps0=prm.get("eps0"), delta0=prm.get("delta0"),
               p=prm.get("p"), q=prm.get("q"))
    row.update(rec.as_dict())
    return row


def run_bench(paths, sweep="rho", tol=1e-6, maxiter=1000, max_time=math.inf, csv_path=None, out=sys.stdout):
    jobs = [(p, s, i, prm, tol, maxiter, max_time) for p in paths for s, i, prm in bench_configs(sweep)]
    fields = BENCH_PREFIX + RunRecord.fields()
    rows = []
    writer = csv.DictWriter(out, fieldnames=fields) if out is not None else None
    if writer:
        writer.writeheader()

    def emit(row):
        rows.append(row)
        clean = {k: ("" if v is None else v) for k, v in row.items()}
        if writer:
            writer.writerow(clean)
            out.flush()
        if csv_path:
            append_csv(csv_path, [row], fields)

    nt = threads()
    try:
        if nt > 1:
            with ProcessPoolExecutor(max_workers=nt) as ex:
                for row in ex.map(_bench_one, jobs):
                    emit(row)
        else:
            for job in jobs:
                emit(_bench_one(job))
    except KeyboardInterrupt:
        print(f"interrupted after {len(rows)} rows", file=sys.stderr)
    return rows


def cmd_bench(args) -> int:
    for p in args.instances:
        _load(p)
    run_bench(args.instances, args.sweep, args.tol, args.maxiter,
              args.maxtime_sec if args.maxtime_sec else math.inf, args.csv)
    return 0


def cmd_export_socp(args) -> int:
    pd = _load(args.instance)
    if args.require_cones and pd.reg.lambda1 == 0 and pd.reg.lambda2 == 0:
        print("lambda1 = lambda2 = 0: the problem has no cones", file=sys.stderr)
        return 4
    sp = socp.write_socp(pd, args.output)
    print(json.dumps(dict(file=args.output, vars=sp.n_vars, rows=len(sp.rows), cones=len(sp.cones), **sp.blocks)))
    return 0


def cmd_check(args) -> int:
    pd = _load(args.instance)
    try:
        name, X_ref, obj_ref = _oracle(pd)
    except TooLarge as exc:
        print(f"SKIP {exc}", file=sys.stderr)
        return 2
    rep = solve(pd, SolverConfig(tol=args.tol, warm_start=AdmmConfig()))
    pobj = primal_objective(pd, rep.primal)
    delta = abs(pobj - obj_ref)
    if name == "lp_oracle":
        ok = delta <= args.abs_tol
        bound = f"|dobj| <= {args.abs_tol:g}"
    else:
        ok = delta <= args.rel_tol * max(1.0, abs(obj_ref))
        bound = f"rel <= {args.rel_tol:g}"
    dX = float(np.abs(rep.primal.X - X_ref).max())
    verdict = "PASS" if ok else "FAIL"
    print(f"{verdict} {name}: pobj={pobj!r} ref={obj_ref!r} |dobj|={delta:.3e} ({bound}) "
          f"max|dX|={dX:.3e} eta={rep.eta:.2e} status={rep.status.value}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otpalm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a seeded instance")
    g.add_argument("--family", choices=["classical", "martingale", "groupda"], required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--n-prime", type=int, default=None, help="martingale: sample size of the second measure")
    g.add_argument("--m1", type=int, default=None)
    g.add_argument("--lambda1", type=float, default=1.0)
    g.add_argument("--lambda2", type=float, default=1.0)
    g.add_argument("--omega", choices=["one", "sqrt"], default="one")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen)

    def solver_flags(p):
        p.add_argument("--tol", type=float, default=1e-6)
        p.add_argument("--maxiter", type=int, default=1000)
        p.add_argument("--maxtime-sec", type=float, default=None)

    s = sub.add_parser("solve", help="warm start + proximal ALM on one instance")
    s.add_argument("instance")
    s.add_argument("--rho", type=float, default=0.01)
    solver_flags(s)
    s.add_argument("--policy", choices=["relative", "absA", "absB", "absAB"], default="relative")
    s.add_argument("--eps0", type=float, default=1.0)
    s.add_argument("--delta0", type=float, default=1.0)
    s.add_argument("--p", type=float, default=1.1)
    s.add_argument("--q", type=float, default=1.1)
    s.add_argument("--no-correction", action="store_true")
    s.add_argument("--no-warm-start", action="store_true")
    s.add_argument("--dump-solution", default=None)
    s.add_argument("--csv", default=None)
    s.add_argument("--strict", action="store_true")
    ref = s.add_mutually_exclusive_group()
    ref.add_argument("--ref-obj", type=float, default=None, help="reference objective for nobj")
    ref.add_argument("--ref-oracle", action="store_true", help="compute the reference with an oracle")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="inexactness-criterion sweeps")
    b.add_argument("instances", nargs="+")
    b.add_argument("--sweep", choices=["rho", "grid", "both"], default="rho")
    solver_flags(b)
    b.add_argument("--csv", default=None)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export-socp", help="write the second-order cone reformulation")
    e.add_argument("instance")
    e.add_argument("-o", "--output", required=True)
    e.add_argument("--require-cones", action="store_true")
    e.set_defaults(func=cmd_export_socp)

    c = sub.add_parser("check", help="compare the solver with a reference oracle")
    c.add_argument("instance")
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--abs-tol", type=float, default=1e-6)
    c.add_argument("--rel-tol", type=float, default=1e-5)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OTPalmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
