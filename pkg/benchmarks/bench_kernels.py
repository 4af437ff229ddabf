"""Compare the compiled kernels against the numpy fallback.

Times each kernel on the same inputs under both backends and prints a CSV
with one row per (kernel, size, backend). Run from the repository root:

    python3 benchmarks/bench_kernels.py --sizes 10,30,60 --reps 200
"""
import argparse
import csv
import sys
import time

import numpy as np

from doptbb.kernels import available_backends
from doptbb.relaxation import interior_start
from doptbb.instance import generate_random


def _best_of(fn, reps):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(m, rng):
    A = rng.normal(size=(2 * m, m))
    L = np.linalg.cholesky(A.T @ A)
    x = rng.normal(size=m)
    y = 0.3 * A[0]
    s = 3 * m
    Q, R = np.linalg.qr(rng.normal(size=(s, m)), mode="complete")
    Q, R = np.ascontiguousarray(Q), np.ascontiguousarray(R)
    e = np.zeros(s)
    e[s // 2] = 1.0
    inst = generate_random(4 * m, seed=int(rng.integers(1 << 30)), m=m, s=2 * m)
    return {
        "chol_update": lambda k: k.chol_update(L.copy(), x.copy()),
        "chol_downdate_logdet": lambda k: k.chol_downdate_logdet(L, y),
        "qr_rank1_update": lambda k: k.qr_rank1_update(Q.copy(), R.copy(), e, x),
        "pairwise_fw": lambda k: _fw(k, inst),
    }


def _fw(k, inst):
    x = interior_start(inst.l.astype(float), inst.u.astype(float), inst.s)
    B = inst.fim(x)
    Binv = np.linalg.inv(B)
    g = ((inst.A @ Binv) * inst.A).sum(axis=1)
    k.pairwise_fw(inst.A, np.zeros((inst.m, inst.m)), Binv, g, x, np.zeros(inst.n),
                  inst.u.astype(float), float(inst.s), 1e-6, np.linalg.slogdet(B)[1],
                  5000, 50, 1e-10)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="10,30,60")
    p.add_argument("--reps", type=int, default=50)
    args = p.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernels are not built; only the fallback can be timed", file=sys.stderr)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["kernel", "m", "backend", "seconds", "speedup"])
    for m in (int(v) for v in args.sizes.split(",")):
        for name, fn in cases(m, np.random.default_rng(m)).items():
            times = {b: _best_of(lambda: fn(mod), args.reps) for b, mod in backends.items()}
            for b, t in times.items():
                w.writerow([name, m, b, f"{t:.3e}", f"{times['python'] / t:.1f}"])


if __name__ == "__main__":
    main()
