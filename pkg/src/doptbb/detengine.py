"""Log-determinant engines for swap moves.

Every engine holds ``B = base + A^T diag(x) A`` for a current design ``x`` in
some factored form and evaluates ``log det(B + v_i v_i^T - v_j v_j^T)`` for
candidate swaps (increment ``x_i``, decrement ``x_j``). Evaluation is split in
two phases to match the loop structure of the local search: ``prepare(i)``
does the work that depends only on ``i``, then ``eval_j(j)`` / ``eval_many``
price individual ``j``.

Five strategies are provided:

simplest  form the swapped matrix and factor it from scratch
chol      rank-one Cholesky update for ``v_i``, downdate for each ``v_j``
sm        explicit inverse, Sherman-Morrison for ``v_i`` and the
          determinant lemma for each ``v_j``
svd       SVD of the stacked row matrix; singular values of a small
          bordered matrix per swap
qr        full QR of the stacked row matrix, Givens rank-one update per swap
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .instance import Instance

# pivot / eigenvalue / singular value below SING_TOL * largest counts as zero
SING_TOL = 1e-10
NEG_INF = -np.inf


class Strategy(str, Enum):
    SIMPLEST = "simplest"
    CHOL = "chol"
    SM = "sm"
    SVD = "svd"
    QR = "qr"


class SingularStart(ValueError):
    """The starting information matrix is singular."""


@dataclass(frozen=True)
class SwapEval:
    i: int
    j: int
    ldet_new: float


def _ldet_from_squares(d: np.ndarray) -> float:
    """``sum(log d)`` for positive squared pivots, -inf under the tolerance."""
    dmax = d.max() if d.size else 0.0
    if d.size == 0 or dmax <= 0.0 or d.min() <= SING_TOL * dmax:
        return NEG_INF
    return float(np.log(d).sum())


def ldet_psd(B: np.ndarray) -> float:
    """Log-determinant of a symmetric PSD matrix via Cholesky; -inf if singular."""
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        return NEG_INF
    return _ldet_from_squares(np.diag(L) ** 2)


def ldet_direct(inst: Instance, x) -> float:
    """``log det(base + A^T diag(x) A)`` by a fresh factorization."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    return ldet_psd(inst.fim(x))


def _check_swap(x, u, i, j):
    if i == j:
        raise ValueError("swap needs i != j")
    if x[i] >= u[i]:
        raise ValueError(f"x[{i}] is already at its upper bound")
    if x[j] <= 0:
        raise ValueError(f"x[{j}] is already zero")


def _base_rows(inst: Instance) -> np.ndarray:
    """Rows ``R`` with ``R^T R == base`` (empty when there is no base)."""
    m = inst.m
    if inst.offset is not None and np.any(inst.offset > 0):
        return np.repeat(inst.A, inst.offset, axis=0)
    if inst.base is None or not np.any(inst.base):
        return np.zeros((0, m))
    w, V = np.linalg.eigh(inst.base)
    keep = w > SING_TOL * max(w.max(), 1.0)
    return (V[:, keep] * np.sqrt(w[keep])).T


class EngineState:
    """Common bookkeeping; subclasses fill in the factorization payload."""

    strategy: Strategy
    refactor_every = 0
    # eval_many is vectorized rather than a loop over eval_j
    batched = False

    def __init__(self, inst: Instance, x):
        self.inst = inst
        self.A = inst.A
        self.u = inst.u
        self.x = np.array(x, dtype=np.int64)
        if self.x.shape != (inst.n,):
            raise ValueError("design has wrong length")
        self._i = None
        self.commits = 0
        self.evaluations = 0
        self.ldet = NEG_INF
        self.refactor()
        if not np.isfinite(self.ldet):
            raise SingularStart("initial information matrix is singular")

    def refactor(self):
        raise NotImplementedError

    def prepare(self, i: int):
        raise NotImplementedError

    def eval_j(self, j: int) -> float:
        raise NotImplementedError

    def eval_many(self, js) -> np.ndarray:
        return np.array([self.eval_j(int(j)) for j in js], dtype=float)

    def _apply(self, i: int, j: int):
        raise NotImplementedError

    def swap_eval(self, i: int, j: int) -> SwapEval:
        _check_swap(self.x, self.u, i, j)
        if self._i != i:
            self.prepare(i)
        return SwapEval(i, j, self.eval_j(j))

    def commit(self, i: int, j: int, ldet_new: float | None = None):
        _check_swap(self.x, self.u, i, j)
        if ldet_new is None:
            ldet_new = self.swap_eval(i, j).ldet_new
        if not np.isfinite(ldet_new):
            raise ValueError("cannot commit a singular swap")
        self._apply(i, j)
        self.x[i] += 1
        self.x[j] -= 1
        self.ldet = float(ldet_new)
        self._i = None
        self.commits += 1
        if self.refactor_every and self.commits % self.refactor_every == 0:
            self.refactor()
        return self


class SimplestEngine(EngineState):
    strategy = Strategy.SIMPLEST

    def refactor(self):
        self.B = self.inst.fim(self.x)
        self.ldet = ldet_psd(self.B)

    def prepare(self, i):
        vi = self.A[i]
        self._Bi = self.B + np.outer(vi, vi)
        self._i = i

    def eval_j(self, j):
        self.evaluations += 1
        vj = self.A[j]
        return ldet_psd(self._Bi - np.outer(vj, vj))

    def _apply(self, i, j):
        vi, vj = self.A[i], self.A[j]
        self.B = self.B + np.outer(vi, vi) - np.outer(vj, vj)


class CholEngine(EngineState):
    strategy = Strategy.CHOL

    def refactor(self):
        B = self.inst.fim(self.x)
        try:
            self.L = np.ascontiguousarray(np.linalg.cholesky(B))
        except np.linalg.LinAlgError:
            self.ldet = NEG_INF
            return
        self.ldet = _ldet_from_squares(np.diag(self.L) ** 2)

    def prepare(self, i):
        Li = self.L.copy()
        kernels.chol_update(Li, self.A[i].copy())
        self._Li = Li
        self._tol = SING_TOL * float(np.max(np.diag(Li)) ** 2)
        self._i = i

    def eval_j(self, j):
        self.evaluations += 1
        return kernels.chol_downdate_logdet(self._Li, self.A[j], self._tol)

    def _apply(self, i, j):
        if self._i != i:
            self.prepare(i)
        L = self._Li.copy()
        if not kernels.chol_downdate(L, self.A[j].copy(), self._tol):
            raise ValueError("Cholesky downdate failed")
        self.L = L


class SMEngine(EngineState):
    """Explicit inverse; refreshed from scratch every ``refactor_every`` commits."""

    strategy = Strategy.SM
    refactor_every = 200
    batched = True

    def refactor(self):
        B = self.inst.fim(self.x)
        self.ldet = ldet_psd(B)
        if np.isfinite(self.ldet):
            self.Binv = np.linalg.inv(B)

    def prepare(self, i):
        vi = self.A[i]
        p = self.Binv @ vi
        denom = 1.0 + vi @ p
        self._Mi = self.Binv - np.outer(p, p) / denom
        self._ldet_i = self.ldet + np.log(denom)
        self._i = i

    def _factor(self, vj):
        return 1.0 - vj @ self._Mi @ vj

    def eval_j(self, j):
        self.evaluations += 1
        f = self._factor(self.A[j])
        return self._ldet_i + np.log(f) if f > SING_TOL else NEG_INF

    def eval_many(self, js):
        js = np.asarray(js, dtype=np.int64)
        self.evaluations += js.size
        V = self.A[js]
        f = 1.0 - np.einsum("ij,ij->i", V @ self._Mi, V)
        out = np.full(js.size, NEG_INF)
        ok = f > SING_TOL
        out[ok] = self._ldet_i + np.log(f[ok])
        return out

    def _apply(self, i, j):
        if self._i != i:
            self.prepare(i)
        vj = self.A[j]
        q = self._Mi @ vj
        self.Binv = self._Mi + np.outer(q, q) / (1.0 - vj @ q)


class _StackedEngine(EngineState):
    """Shared row bookkeeping for the engines that factor ``A_x`` itself.

    ``A_x`` stacks ``v_l^T`` ``x_l`` times (after any rows representing the
    base matrix). ``rows_of[l]`` lists the rows holding copies of ``v_l`` in
    ascending order; the row locator of ``l`` is ``rows_of[l][0]``.
    """

    def _build_stack(self):
        head = _base_rows(self.inst)
        counts = self.x
        self.Ax = np.ascontiguousarray(
            np.vstack([head, np.repeat(self.A, counts, axis=0)]))
        self.rows_of = {}
        r = head.shape[0]
        for ell in np.flatnonzero(counts):
            c = int(counts[ell])
            self.rows_of[int(ell)] = list(range(r, r + c))
            r += c

    def locator(self, j: int) -> int:
        return self.rows_of[j][0]

    def _move_row(self, i, j):
        r = self.rows_of[j].pop(0)
        if not self.rows_of[j]:
            del self.rows_of[j]
        self.rows_of.setdefault(i, []).append(r)
        self.rows_of[i].sort()
        self.Ax[r] = self.A[i]
        return r


class SVDEngine(_StackedEngine):
    """Thin SVD ``A_x = U diag(sig) V^T``; swaps via the bordered matrix K."""

    strategy = Strategy.SVD
    refactor_every = 200

    def refactor(self):
        self._build_stack()
        if self.Ax.shape[0] < self.inst.m:
            self.ldet = NEG_INF
            return
        U, sig, Vt = np.linalg.svd(self.Ax, full_matrices=False)
        self.U, self.sig, self.Vt = U, sig, Vt
        self.SVt = sig[:, None] * Vt
        self.ldet = _ldet_from_squares(sig ** 2)
        self._last = None

    def prepare(self, i):
        self._i = i

    def _bordered(self, i, j):
        w = self.A[i] - self.A[j]
        r = self.locator(j)
        ut = self.U[r]
        pnorm = np.sqrt(max(0.0, 1.0 - ut @ ut))
        K = np.vstack([self.SVt + np.outer(ut, w), pnorm * w])
        return K, r, ut, pnorm

    def eval_j(self, j):
        self.evaluations += 1
        K, *_ = self._bordered(self._i, j)
        sv = np.linalg.svd(K, compute_uv=False)
        return _ldet_from_squares(sv ** 2)

    def _apply(self, i, j):
        K, r, ut, pnorm = self._bordered(i, j)
        self._move_row(i, j)
        if pnorm <= 1e-8:
            self.refactor()
            return
        Uk, sk, Vkt = np.linalg.svd(K, full_matrices=False)
        p = -self.U @ ut
        p[r] += 1.0
        Ubig = np.hstack([self.U, (p / pnorm)[:, None]])
        self.U = Ubig @ Uk
        self.sig = sk
        self.Vt = Vkt
        self.SVt = sk[:, None] * Vkt


class QREngine(_StackedEngine):
    """Full QR ``A_x = Q R`` updated by Givens rotations.

    ``eval_j`` performs the whole rank-one update on copies of ``(Q, R)``;
    the factors from the most recent evaluation are kept for ``commit``.
    """

    strategy = Strategy.QR

    def refactor(self):
        self._build_stack()
        if self.Ax.shape[0] < self.inst.m:
            self.ldet = NEG_INF
            return
        Q, R = np.linalg.qr(self.Ax, mode="complete")
        self.Q = np.ascontiguousarray(Q)
        self.R = np.ascontiguousarray(R)
        self.ldet = self._ldet_R(self.R)
        self._last = None

    def _ldet_R(self, R):
        m = R.shape[1]
        return _ldet_from_squares(np.diag(R)[:m] ** 2)

    def prepare(self, i):
        self._i = i

    def _update(self, i, j):
        Q = self.Q.copy()
        R = self.R.copy()
        e = np.zeros(Q.shape[0])
        e[self.locator(j)] = 1.0
        kernels.qr_rank1_update(Q, R, e, self.A[i] - self.A[j])
        return Q, R

    def eval_j(self, j):
        self.evaluations += 1
        Q, R = self._update(self._i, j)
        self._last = (self._i, j, Q, R)
        return self._ldet_R(R)

    def _apply(self, i, j):
        if self._last is not None and self._last[:2] == (i, j):
            Q, R = self._last[2:]
        else:
            Q, R = self._update(i, j)
        self._move_row(i, j)
        self.Q, self.R = Q, R
        self._last = None


_ENGINES = {
    Strategy.SIMPLEST: SimplestEngine,
    Strategy.CHOL: CholEngine,
    Strategy.SM: SMEngine,
    Strategy.SVD: SVDEngine,
    Strategy.QR: QREngine,
}


def engine_init(inst: Instance, x, strategy="sm") -> EngineState:
    """Build the factorization state for design ``x``.

    Raises :class:`SingularStart` when the information matrix is singular.
    """
    return _ENGINES[Strategy(strategy)](inst, x)


def swap_eval(st: EngineState, i: int, j: int) -> SwapEval:
    return st.swap_eval(i, j)


def swap_commit(st: EngineState, i: int, j: int) -> EngineState:
    return st.commit(i, j)


def det_lemma_factor(Minv: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """``det(M + a b^T) / det(M)`` given ``M^{-1}``."""
    return float(1.0 + b @ Minv @ a)
