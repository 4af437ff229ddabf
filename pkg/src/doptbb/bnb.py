"""Branch-and-bound for the integer D-optimal design problem.

Nodes are boxes ``l' <= x <= u'``. Each node solves the continuous relaxation,
certifies an upper bound from a dual feasible point, and optionally

- VBT: tightens the box with the dual multipliers and the incumbent value,
  re-solving while the box keeps shrinking;
- LSI: runs local search from an integral relaxation point;
- LSC: rounds a fractional relaxation point and runs local search;
- HS: compares the Hadamard and spectral bounds of the box as well.

The seven preset versions switch these on in the combinations below.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .bounds import EmptyBox, node_bounds, vbt_tighten
from .detengine import SingularStart, ldet_direct
from .heuristics import (Mode, RankDeficient, SEEDS, build_seed, continuous_to_integer,
                         local_search)
from .instance import Instance, normalize_to_zero_lower, restore_design
from .relaxation import NoInteriorStart, SingularPoint, recover_dual, solve_relaxation

log = logging.getLogger(__name__)

#: version -> (vbt, lsi, lsc, hs)
VERSIONS = {
    1: (False, False, False, False),
    2: (True, False, False, False),
    3: (True, True, False, False),
    4: (True, True, False, True),
    5: (False, False, True, False),
    6: (True, False, True, False),
    7: (True, False, True, True),
}


class Infeasible(ValueError):
    """No feasible design has a finite objective."""


@dataclass
class SolverConfig:
    vbt: bool = False
    lsi: bool = False
    lsc: bool = False
    hs: bool = False
    integrality_tol: float = 1e-5
    gap_tol: float = 1e-6
    ls_mode: str = "fi"
    strategy: str = "sm"
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    relax_tol: float = 1e-6
    relax_iters: int = 5000
    warm_start: bool = False
    root_ls: bool = True
    vbt_rounds: int = 20
    threads: int = 1
    # called as hook(l_before, u_before, result_or_None, LB) after each tightening
    tighten_hook: Optional[Callable] = None
    version: Optional[int] = None

    @classmethod
    def from_version(cls, version: int, **kw) -> "SolverConfig":
        vbt, lsi, lsc, hs = VERSIONS[version]
        return cls(vbt=vbt, lsi=lsi, lsc=lsc, hs=hs, version=version, **kw)


@dataclass(order=True)
class Node:
    priority: float
    seq: int
    l: np.ndarray = field(compare=False)
    u: np.ndarray = field(compare=False)
    ub: float = field(compare=False, default=np.inf)
    depth: int = field(compare=False, default=0)
    x_warm: Optional[np.ndarray] = field(compare=False, default=None)


@dataclass
class OptResult:
    best_x: np.ndarray
    best_z: float
    node_count: int
    wall_time: float
    root_relax_value: float
    root_ub: float
    root_hadamard: float
    root_spectral: float
    vbt_effective: int
    vars_fixed: int
    status: str
    ls_z: float = -np.inf
    ls_time: float = 0.0
    lb_history: list = field(default_factory=list)


def is_integral(x, tol) -> bool:
    x = np.asarray(x)
    return bool(np.all(np.abs(x - np.round(x)) <= tol))


def branch(node: Node, xC, seq: int = 0):
    """Split on the most fractional coordinate (lowest index on ties).

    Returns ``(child_low, child_high)`` with ``u'_j <- floor(xC_j)`` and
    ``l'_j <- ceil(xC_j)``. A fully integral ``xC`` splits the first free
    coordinate at its value instead.
    """
    l, u = node.l, node.u
    xC = np.asarray(xC, dtype=float)
    free = l < u
    frac = xC - np.floor(xC)
    score = np.where(free, np.minimum(frac, 1.0 - frac), -1.0)
    j = int(np.argmax(score))
    if score[j] > 0:
        lo_val, hi_val = int(np.floor(xC[j])), int(np.ceil(xC[j]))
    else:
        j = int(np.flatnonzero(free)[0])
        v = int(np.clip(np.round(xC[j]), l[j], u[j]))
        lo_val, hi_val = (v, v + 1) if v < u[j] else (v - 1, v)
    u_low = u.copy()
    u_low[j] = lo_val
    l_high = l.copy()
    l_high[j] = hi_val
    child_low = Node(node.priority, seq, l.copy(), u_low, node.ub, node.depth + 1, xC)
    child_high = Node(node.priority, seq + 1, l_high, u.copy(), node.ub, node.depth + 1, xC)
    return child_low, child_high


def root_incumbent(inst: Instance, config: SolverConfig | None = None):
    """Best design over every seed x mode local search, with its objective."""
    cfg = config or SolverConfig()
    best_x, best_z = None, -np.inf
    seeds = list(SEEDS)
    try:
        built = [build_seed(inst, sd) for sd in seeds]
    except RankDeficient:
        built = [build_seed(inst, "relax")]
    for x0 in built:
        for md in Mode:
            try:
                res = local_search(inst, x0, md, cfg.strategy)
            except SingularStart:
                continue
            if res.ldet > best_z:
                best_x, best_z = res.x, res.ldet
    return best_x, best_z


class _Search:
    def __init__(self, inst: Instance, cfg: SolverConfig):
        self.inst = inst
        self.cfg = cfg
        self.lock = threading.Lock()
        self.LB = -np.inf
        self.best_x = None
        self.vbt_effective = 0
        self.vars_fixed = 0
        self.lb_history = []
        self.seq = itertools.count()
        # local search is deterministic, so a start already searched adds nothing
        self._ls_seen = set()

    def offer(self, x, z):
        with self.lock:
            if z > self.LB:
                self.LB = float(z)
                self.best_x = np.array(x, dtype=np.int64)
                self.lb_history.append(self.LB)

    def _ls(self, x0):
        key = np.asarray(x0, dtype=np.int64).tobytes()
        with self.lock:
            if key in self._ls_seen:
                return
            self._ls_seen.add(key)
        modes = list(Mode) if self.cfg.ls_mode == "all" else [Mode(self.cfg.ls_mode)]
        for md in modes:
            try:
                res = local_search(self.inst, x0, md, self.cfg.strategy)
            except SingularStart:
                return
            self.offer(res.x, res.ldet)

    def _relax(self, l, u, warm, tol=None):
        tol = self.cfg.relax_tol if tol is None else tol
        rel = solve_relaxation(self.inst, l, u, tol=tol, max_iters=self.cfg.relax_iters,
                               x0=warm if self.cfg.warm_start else None)
        dual = recover_dual(self.inst, rel.xC, l, u)
        return rel, dual

    def process(self, node: Node):
        """Run the node procedure; returns the list of child nodes."""
        cfg = self.cfg
        inst = self.inst
        s = inst.s
        l, u = node.l.copy(), node.u.copy()
        if node.ub <= self.LB + cfg.gap_tol:
            return []
        rounds = 0
        while True:
            bound = np.inf
            if cfg.hs:
                rep = node_bounds(inst, u)
                bound = min(rep.hadamard, rep.spectral)
                if bound <= self.LB + cfg.gap_tol:
                    return []
            try:
                rel, dual = self._relax(l, u, node.x_warm)
            except (NoInteriorStart, SingularPoint):
                return []
            xC = rel.xC
            ub = dual.zeta_hat
            bound = min(bound, ub, node.ub)
            if is_integral(xC, cfg.integrality_tol):
                x = np.clip(np.round(xC), l, u).astype(np.int64)
                if x.sum() == s:
                    z = ldet_direct(inst, x)
                    if np.isfinite(z):
                        self.offer(x, z)
                        if cfg.lsi:
                            self._ls(x)
                        if bound > self.LB + cfg.gap_tol:
                            # close the relaxation gap before trusting the integral point
                            rel, dual = self._relax(l, u, xC, tol=0.1 * cfg.gap_tol / max(1.0, abs(z)))
                            xC = rel.xC
                            bound = min(bound, dual.zeta_hat)
                if bound <= self.LB + cfg.gap_tol:
                    return []
            elif bound <= self.LB + cfg.gap_tol:
                return []
            if not cfg.vbt or rounds >= cfg.vbt_rounds or not np.isfinite(self.LB):
                break
            rounds += 1
            try:
                res = vbt_tighten(l, u, self.LB, dual)
            except EmptyBox:
                if cfg.tighten_hook:
                    cfg.tighten_hook(l, u, None, self.LB)
                return []
            if cfg.tighten_hook:
                cfg.tighten_hook(l, u, res, self.LB)
            with self.lock:
                self.vbt_effective += res.n_tightened
                self.vars_fixed += res.n_fixed
            if res.n_tightened == 0:
                break
            l, u = res.new_l, res.new_u
            if not (l.sum() <= s <= u.sum()):
                return []
        if cfg.lsc:
            try:
                x0 = continuous_to_integer(xC, s, u, l)
            except ValueError:
                x0 = None
            if x0 is not None:
                self._ls(x0)
            if bound <= self.LB + cfg.gap_tol:
                return []
        if np.all(l == u):
            return []
        work = Node(-bound, 0, l, u, bound, node.depth, xC)
        children = []
        for child in branch(work, xC, next(self.seq)):
            if child.l.sum() <= s <= child.u.sum():
                child.seq = next(self.seq)
                children.append(child)
        return children


def solve(inst: Instance, config: SolverConfig | None = None) -> OptResult:
    """Solve to optimality (within ``gap_tol``) or until a limit is hit."""
    cfg = config or SolverConfig()
    t0 = time.perf_counter()
    original = inst
    if np.any(inst.l > 0):
        inst, _, _ = normalize_to_zero_lower(inst)
    search = _Search(inst, cfg)

    rep = node_bounds(inst)
    try:
        root_rel = solve_relaxation(inst, tol=min(cfg.relax_tol, 1e-9), max_iters=max(cfg.relax_iters, 20000))
        root_dual = recover_dual(inst, root_rel.xC)
        root_z, root_ub = root_rel.z_primal, root_dual.zeta_hat
    except NoInteriorStart as exc:
        raise Infeasible(str(exc)) from exc

    ls_z, ls_time = -np.inf, 0.0
    if cfg.root_ls:
        t_ls = time.perf_counter()
        x_ls, ls_z = root_incumbent(inst, cfg)
        ls_time = time.perf_counter() - t_ls
        if x_ls is not None:
            search.offer(x_ls, ls_z)

    heap = [Node(-root_ub, next(search.seq), inst.l.copy(), inst.u.copy(), root_ub, 0, root_rel.xC)]
    nodes = 0
    status = "optimal"
    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    try:
        while heap:
            if cfg.node_limit is not None and nodes >= cfg.node_limit:
                status = "node_limit"
                break
            if cfg.time_limit is not None and time.perf_counter() - t0 > cfg.time_limit:
                status = "time_limit"
                break
            batch = [heapq.heappop(heap)]
            while pool is not None and heap and len(batch) < cfg.threads:
                batch.append(heapq.heappop(heap))
            nodes += len(batch)
            if pool is None:
                results = [search.process(batch[0])]
            else:
                results = list(pool.map(search.process, batch))
            for children in results:
                for child in children:
                    heapq.heappush(heap, child)
    finally:
        if pool is not None:
            pool.shutdown()

    if search.best_x is None:
        raise Infeasible("no design with finite objective found")
    best_x = restore_design(inst, search.best_x) if inst is not original else search.best_x
    return OptResult(
        best_x=best_x,
        best_z=search.LB,
        node_count=nodes,
        wall_time=time.perf_counter() - t0,
        root_relax_value=root_z,
        root_ub=root_ub,
        root_hadamard=rep.hadamard,
        root_spectral=rep.spectral,
        vbt_effective=search.vbt_effective,
        vars_fixed=search.vars_fixed,
        status=status,
        ls_z=ls_z,
        ls_time=ls_time,
        lb_history=search.lb_history,
    )
