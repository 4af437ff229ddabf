"""Timing harness for the swap engines.

Two measurements are offered. ``swap`` times the evaluation of candidate
swaps from a fixed design: for a handful of rows ``i`` the engine is prepared
once and every admissible ``j`` is evaluated, and the reported value is the
mean wall time per evaluated swap. The local-search modes (``fi``, ``fiplus``,
``bi``) time a full local search from the ``bin-x0`` seed instead.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .detengine import Strategy, engine_init
from .heuristics import Mode, build_seed, local_search
from .instance import Instance, generate_random

FIELDS = ("strategy", "n", "m", "s", "mode", "seed", "seconds")


@dataclass
class BenchRow:
    strategy: str
    n: int
    m: int
    s: int
    mode: str
    seed: int
    seconds: float

    def as_dict(self):
        return asdict(self)


def bench_instance(n: int, m: int, s: int, seed: int) -> Instance:
    """Random instance with u in {1, 2, 3}; ``s`` must fit under ``sum(u)``."""
    return generate_random(n, seed=seed, m=m, s=s)


def time_swaps(inst: Instance, x, strategy: str, rows: int = 5, seed: int = 0) -> float:
    """Mean seconds per swap evaluation over ``rows`` prepared rows ``i``."""
    rng = np.random.default_rng(seed)
    eng = engine_init(inst, x, strategy)
    x = eng.x
    cand = np.flatnonzero(x < inst.u)
    pos = np.flatnonzero(x > 0)
    pick = rng.choice(cand, size=min(rows, cand.size), replace=False)
    total = 0.0
    count = 0
    for i in pick:
        js = pos[pos != i]
        t0 = time.perf_counter()
        eng.prepare(int(i))
        eng.eval_many(js)
        total += time.perf_counter() - t0
        count += js.size
    return total / max(count, 1)


def run(ns, ms, ss, strategies=tuple(s.value for s in Strategy), modes=("swap",),
        seeds=(0,), reps: int = 1, rows: int = 5):
    """Sweep the grid; ``ms`` / ``ss`` entries of ``None`` mean ``n // 4`` / ``n // 2``.

    Strategies run one after another on the same instance and design so that
    timings do not interfere. ``seconds`` is the mean over ``reps``.
    """
    out = []
    for n in ns:
        for m in ms:
            m_ = n // 4 if m is None else int(m)
            for s in ss:
                s_ = n // 2 if s is None else int(s)
                for seed in seeds:
                    inst = bench_instance(n, m_, s_, seed)
                    x0 = build_seed(inst, "bin-x0")
                    for mode in modes:
                        for strat in strategies:
                            times = []
                            for _ in range(reps):
                                if mode == "swap":
                                    times.append(time_swaps(inst, x0, strat, rows, seed))
                                else:
                                    res = local_search(inst, x0, Mode(mode), strat)
                                    times.append(res.seconds)
                            out.append(BenchRow(strat, n, m_, s_, mode, seed, float(np.mean(times))))
    return out
