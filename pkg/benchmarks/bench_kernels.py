"""Compare the compiled grouped kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 50] [--solve]

Prints per-kernel timings for both backends on a few partition shapes and
checks that they agree. With ``--solve`` it also times a full group-regularized
solve in a subprocess per backend (selected through ``OTPALM_KERNELS``).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from otpalm import kernels
from otpalm.model import GroupPartition

SOLVE_SNIPPET = """
import time
from otpalm import solve, SolverConfig, AdmmConfig, KERNEL_BACKEND
from otpalm.instances import gen_group_da, GroupDASpec
pd = gen_group_da(GroupDASpec({m}, {m}, seed=0))
t = time.perf_counter()
rep = solve(pd, SolverConfig(warm_start=AdmmConfig()))
print(KERNEL_BACKEND, rep.outer_iters, rep.linear_systems_solved, f"{{time.perf_counter() - t:.3f}}")
"""


def partitions():
    rng = np.random.default_rng(0)
    yield "columns-x-2-labels 200x200", GroupPartition.column_classes(np.arange(200) >= 100, 200)
    yield "columns-x-5-labels 400x400", GroupPartition.column_classes(rng.integers(0, 5, 400), 400)
    yield "pairs 300x300", GroupPartition(np.arange(90000), np.arange(0, 90001, 2), np.ones(45000), (300, 300))


def run_kernel(be, name, part, x, y, what, reps):
    idx, ptr = part.index, part.ptr
    G = part.n_groups
    out = np.zeros_like(x)
    wn = np.zeros(G)
    zeta = np.full(G, 0.05)
    coef = np.linspace(0.1, 1.0, G)
    sq = np.zeros(G)
    if name == "group_prox":
        fn = lambda: be.group_prox(x, idx, ptr, 0.7, zeta, out, wn)
    elif name == "group_rank1_apply":
        def fn():
            out[:] = 0.0
            be.group_rank1_apply(y, idx, ptr, what, coef, out)
    else:
        fn = lambda: be.group_sq_norms(x, idx, ptr, sq)
    t = min(timeit.repeat(fn, number=reps, repeat=3)) / reps
    fn()
    res = out.copy() if name != "group_sq_norms" else sq.copy()
    return t, res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--solve", action="store_true")
    ap.add_argument("--solve-size", type=int, default=200)
    args = ap.parse_args(argv)

    cb = kernels.compiled_backend
    pb = kernels.python_backend
    if cb is None:
        print("compiled backend not built; only the numpy fallback is available")
    print(f"{'partition':32s} {'kernel':18s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s} {'max diff':>9s}")
    rng = np.random.default_rng(1)
    for label, part in partitions():
        k = part.shape[0] * part.shape[1]
        x = rng.standard_normal(k)
        y = rng.standard_normal(k)
        what = np.abs(rng.standard_normal(k))
        for name in ("group_prox", "group_rank1_apply", "group_sq_norms"):
            tp, rp = run_kernel(pb, name, part, x, y, what, args.repeat)
            if cb is not None:
                tc, rc = run_kernel(cb, name, part, x, y, what, args.repeat)
                diff = float(np.abs(rp - rc).max())
                print(f"{label:32s} {name:18s} {tp * 1e6:10.1f} {tc * 1e6:10.1f} {tp / tc:8.2f} {diff:9.1e}")
            else:
                print(f"{label:32s} {name:18s} {tp * 1e6:10.1f} {'-':>10s}")

    if args.solve:
        print("\nfull solve (backend, outer, lin, seconds)")
        for be in ("python", "cython"):
            env = dict(os.environ, OTPALM_KERNELS=be)
            out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(m=args.solve_size)],
                                 env=env, capture_output=True, text=True, check=True)
            print(out.stdout.strip())


if __name__ == "__main__":
    main()
