import itertools

import numpy as np
import pytest

from doptbb.detengine import ldet_direct
from doptbb.instance import Instance, generate_random


def enumerate_designs(u, s, l=None):
    """Every integer x with l <= x <= u and sum(x) == s."""
    l = np.zeros(len(u), dtype=int) if l is None else np.asarray(l)
    ranges = [range(int(a), int(b) + 1) for a, b in zip(l, u)]
    for x in itertools.product(*ranges):
        if sum(x) == s:
            yield np.array(x, dtype=np.int64)


def brute_force(inst, l=None, u=None):
    """(optimum, list of optimal designs, worst finite value) by enumeration."""
    u = inst.u if u is None else u
    vals = [(ldet_direct(inst, x), x) for x in enumerate_designs(u, inst.s, l)]
    finite = [v for v, _ in vals if np.isfinite(v)]
    best = max(v for v, _ in vals)
    optimal = [x for v, x in vals if np.isfinite(v) and v >= best - 1e-9]
    worst = min(finite) if finite else -np.inf
    return best, optimal, worst


def small_instance(seed):
    """Enumerable instance family: n = 8, u <= 2, m in {2, 3}."""
    m = 2 + seed % 2
    s = 4 + seed % 3
    density = 1.0 if seed % 4 >= 2 else 0.5
    return generate_random(8, seed=seed, density=density, u_max=2, m=m, s=s)


@pytest.fixture
def three_rows():
    """Rows e1, e2, (1, 1) with 0/1 bounds and s = 2."""
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return Instance(A=A, l=np.zeros(3), u=np.ones(3), s=2)
