"""Starting designs and swap local search.

Seeds come from the SVD of ``A``: leverage scores (a feasible point of the
continuous relaxation) or row energies, each rounded either to a 0/1 design
("bin") or greedily up to the bounds ("int"). Every seed contains a set of
``m`` linearly independent rows so its information matrix is nonsingular.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .detengine import engine_init
from .instance import Instance

IMPROVE_TOL = 1e-9


class RankDeficient(ValueError):
    pass


class BudgetExceedsN(ValueError):
    pass


class Mode(str, Enum):
    FI = "fi"
    FIPLUS = "fiplus"
    BI = "bi"


SEEDS = ("bin-x0", "int-x0", "bin-xhat0", "int-xhat0")


@dataclass
class ScoreVector:
    scores: np.ndarray
    tau: np.ndarray


@dataclass
class IndependentSeed:
    tilde_N: np.ndarray
    tilde_x: np.ndarray


@dataclass
class LSResult:
    x: np.ndarray
    ldet: float
    moves: int
    evaluations: int
    seconds: float = 0.0


def _order(scores) -> np.ndarray:
    # stable descending sort: equal scores keep index order
    return np.argsort(-np.asarray(scores), kind="stable")


def select_independent_rows(inst: Instance, tol: float = 1e-9) -> IndependentSeed:
    """First ``m`` linearly independent rows of ``A`` in index order."""
    A = inst.A
    n, m = A.shape
    basis = np.zeros((0, m))
    chosen = []
    for ell in range(n):
        v = A[ell]
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        r = v - basis.T @ (basis @ v)
        r = r - basis.T @ (basis @ r)
        rn = np.linalg.norm(r)
        if rn > tol * norm:
            basis = np.vstack([basis, r / rn])
            chosen.append(ell)
            if len(chosen) == m:
                break
    if len(chosen) < m:
        raise RankDeficient(f"only {len(chosen)} independent rows, need {m}")
    x = np.zeros(n, dtype=np.int64)
    x[chosen] = 1
    return IndependentSeed(np.array(chosen, dtype=np.int64), x)


def leverage_scores(inst: Instance) -> ScoreVector:
    """``x0_j = sum_{k<s} U_jk^2`` from the full SVD of ``A``."""
    U, _, _ = np.linalg.svd(inst.A, full_matrices=True)
    scores = (U[:, : inst.s] ** 2).sum(axis=1)
    return ScoreVector(scores, _order(scores))


def weighted_scores(inst: Instance) -> ScoreVector:
    """``xhat0_j = sum_{i<m} (U_ji sigma_i)^2``, i.e. the squared row norms."""
    U, sig, _ = np.linalg.svd(inst.A, full_matrices=False)
    scores = ((U * sig) ** 2).sum(axis=1)
    return ScoreVector(scores, _order(scores))


def round_bin(sv: ScoreVector, seed: IndependentSeed, s: int) -> np.ndarray:
    m = seed.tilde_N.size
    n = seed.tilde_x.size
    if s - m > n - m:
        raise BudgetExceedsN(f"cannot place {s - m} extra units on {n - m} rows")
    x = seed.tilde_x.copy()
    need = s - m
    for j in sv.tau:
        if need == 0:
            break
        if x[j] == 0:
            x[j] = 1
            need -= 1
    return x


def round_int(sv: ScoreVector, seed: IndependentSeed, s: int, u) -> np.ndarray:
    x = seed.tilde_x.copy()
    delta = np.asarray(u, dtype=np.int64) - x
    left = s - seed.tilde_N.size
    for j in sv.tau:
        take = min(int(delta[j]), max(0, left))
        x[j] += take
        left -= take
    return x


def continuous_to_integer(xc, s: int, u, l=None) -> np.ndarray:
    """Round a relaxation point: floor, then bump the largest fractional parts."""
    xc = np.asarray(xc, dtype=float)
    u = np.asarray(u, dtype=np.int64)
    lo = np.zeros_like(u) if l is None else np.asarray(l, dtype=np.int64)
    near = np.abs(xc - np.round(xc)) < 1e-9
    xc = np.clip(np.where(near, np.round(xc), xc), lo, u)
    x = np.floor(xc).astype(np.int64)
    frac = xc - x
    k = int(x.sum())
    while k < s:
        frac = np.where(x < u, frac, -1.0)
        j = int(np.argmax(frac))
        if frac[j] < 0:
            raise ValueError("bounds leave no room to reach the budget")
        x[j] += 1
        frac[j] = 0.0
        k += 1
    return x


def local_search(inst: Instance, x, mode="bi", strategy="sm", max_moves=None) -> LSResult:
    """Swap local search from a feasible design with finite objective.

    ``fi`` takes the first improving pair in lexicographic order, ``fiplus``
    the best ``j`` for the first improving ``i``, ``bi`` the best pair
    overall. Returns a design with no swap improving by more than
    ``IMPROVE_TOL``.
    """
    t0 = time.perf_counter()
    mode = Mode(mode)
    eng = engine_init(inst, x, strategy)
    u = inst.u
    n = inst.n
    moves = 0
    while max_moves is None or moves < max_moves:
        x = eng.x
        z0 = eng.ldet
        best = None
        best_z = z0 + IMPROVE_TOL
        pos = np.flatnonzero(x > 0)
        for i in range(n):
            if x[i] >= u[i]:
                continue
            js = pos[pos != i]
            if js.size == 0:
                continue
            eng.prepare(i)
            if mode is Mode.FI:
                hit = None
                if eng.batched:
                    vals = eng.eval_many(js)
                    k = np.flatnonzero(vals > best_z)
                    if k.size:
                        hit = (int(js[k[0]]), float(vals[k[0]]))
                else:
                    for j in js:
                        z = eng.eval_j(int(j))
                        if z > best_z:
                            hit = (int(j), z)
                            break
                if hit is not None:
                    best = (i, *hit)
                    break
                continue
            vals = eng.eval_many(js)
            k = int(np.argmax(vals))
            if vals[k] > best_z:
                best = (i, int(js[k]), float(vals[k]))
                best_z = vals[k]
                if mode is Mode.FIPLUS:
                    break
        if best is None:
            break
        i, j, z = best
        eng.commit(i, j, z)
        moves += 1
    return LSResult(eng.x.copy(), float(eng.ldet), moves, eng.evaluations,
                    time.perf_counter() - t0)


def build_seed(inst: Instance, name: str) -> np.ndarray:
    """Starting design by name: one of :data:`SEEDS` or ``"relax"``."""
    if name == "relax":
        from .relaxation import solve_relaxation

        rel = solve_relaxation(inst)
        return continuous_to_integer(rel.xC, inst.s, inst.u)
    kind, _, source = name.partition("-")
    seed = select_independent_rows(inst)
    sv = leverage_scores(inst) if source == "x0" else weighted_scores(inst)
    if kind == "bin":
        return round_bin(sv, seed, inst.s)
    if kind == "int":
        return round_int(sv, seed, inst.s, inst.u)
    raise ValueError(f"unknown seed {name!r}")


def sweep(inst: Instance, seeds=SEEDS, modes=tuple(Mode), strategy="sm"):
    """Run every mode from every seed; returns ``{(seed, mode): LSResult}``."""
    out = {}
    for sd in seeds:
        x0 = build_seed(inst, sd)
        for md in modes:
            out[(sd, Mode(md).value)] = local_search(inst, x0, md, strategy)
    return out


def best_of(results) -> LSResult:
    return max(results.values(), key=lambda r: r.ldet)
