"""Continuous relaxation over the capped simplex and its Lagrangian dual.

The relaxation maximizes ``log det(base + A^T diag(x) A)`` subject to
``sum(x) == s`` and ``l <= x <= u`` with real ``x``. It is solved by a
conditional-gradient method: the linear maximization oracle over the capped
simplex is a greedy fill, and the step direction is the pairwise one that
moves mass from the coordinate with the smallest gradient that can decrease to
the one with the largest gradient that can increase. The line search along
such a direction is exact in closed form because the determinant of a rank-two
update is a quadratic in the step.

A dual feasible point is built from any primal point with ``Lambda = B^{-1}``;
its value is a certified upper bound whatever the accuracy of the primal
solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .detengine import SING_TOL, ldet_psd
from .instance import Instance

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 5000
REFRESH_EVERY = 50


class NoInteriorStart(ValueError):
    """Every feasible point of the box has a singular information matrix."""


class SingularPoint(ValueError):
    pass


@dataclass
class RelaxSolution:
    xC: np.ndarray
    z_primal: float
    iterations: int
    converged: bool
    gap: float = np.inf


@dataclass
class DualCertificate:
    Lambda: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    nu: float
    zeta_hat: float

    def residual(self, inst: Instance) -> float:
        """Largest violation of ``Lambda . v_i v_i^T - lam_i + theta_i - nu = 0``."""
        c = np.einsum("ij,jk,ik->i", inst.A, self.Lambda, inst.A)
        return float(np.max(np.abs(c - self.lam + self.theta - self.nu)))


def _box(inst: Instance, l, u):
    l = inst.l if l is None else np.asarray(l, dtype=np.int64)
    u = inst.u if u is None else np.asarray(u, dtype=np.int64)
    return l, u


def gradient(inst: Instance, x) -> np.ndarray:
    """``d/dx_i log det B(x) = v_i^T B(x)^{-1} v_i``."""
    B = inst.fim(x)
    L = np.linalg.cholesky(B)
    W = np.linalg.solve(L, inst.A.T)
    return (W * W).sum(axis=0)


def lmo_capped_simplex(g, l, u, s) -> np.ndarray:
    """Maximize ``g . y`` over ``{sum(y) == s, l <= y <= u}``.

    Coordinates are raised from ``l`` to ``u`` in decreasing ``g`` order (ties
    by index); the last one raised may be fractional.
    """
    g = np.asarray(g, dtype=float)
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    y = l.copy()
    left = s - l.sum()
    order = np.argsort(-g, kind="stable")
    room = (u - l)[order]
    before = np.concatenate(([0.0], np.cumsum(room)[:-1]))
    add = np.clip(left - before, 0.0, room)
    y[order] += add
    return y


def interior_start(l, u, s) -> np.ndarray:
    l = np.asarray(l, dtype=float)
    width = np.asarray(u, dtype=float) - l
    total = width.sum()
    if total == 0:
        return l.copy()
    return l + (s - l.sum()) * width / total


def _project_warm(x0, l, u, s):
    x = np.clip(np.asarray(x0, dtype=float), l, u)
    diff = s - x.sum()
    if diff > 0:
        room = u - x
        x += diff * room / room.sum()
    elif diff < 0:
        room = x - l
        x += diff * room / room.sum()
    return x


def _factor(inst, x):
    B = inst.fim(x)
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L) ** 2
    if d.min() <= SING_TOL * d.max():
        return None
    Linv = np.linalg.inv(L)
    Binv = Linv.T @ Linv
    return Binv, float(np.log(d).sum())


def solve_relaxation(inst: Instance, l=None, u=None, tol: float | None = None,
                     max_iters: int = DEFAULT_MAX_ITERS, x0=None) -> RelaxSolution:
    """Maximize the log-det objective over the capped simplex ``[l, u]``.

    ``tol`` is relative: iterations stop once the duality gap
    ``g . (y - x)`` drops to ``tol * max(1, |z|)``. ``x0`` is an optional warm
    start, projected into the box and blended with the interior start.
    """
    l, u = _box(inst, l, u)
    s = inst.s
    if not l.sum() <= s <= u.sum():
        raise ValueError("budget outside the box")
    tol = DEFAULT_TOL if tol is None else tol
    lf = l.astype(float)
    uf = u.astype(float)
    A = inst.A

    if not np.isfinite(ldet_psd(inst.fim(u))):
        raise NoInteriorStart("information matrix is singular on the whole box")
    x = interior_start(lf, uf, s)
    if x0 is not None:
        x = 0.9 * _project_warm(x0, lf, uf, s) + 0.1 * x
    fac = _factor(inst, x)
    if fac is None:
        raise NoInteriorStart("interior start is singular")
    Binv, z = fac
    g = np.einsum("ij,jk,ik->i", A, Binv, A)

    base = np.zeros((inst.m, inst.m)) if inst.base is None else np.ascontiguousarray(inst.base, dtype=float)
    z, it, status, gap = kernels.pairwise_fw(
        np.ascontiguousarray(A, dtype=float), base, np.ascontiguousarray(Binv), g, x,
        lf, uf, float(s), float(tol), float(z), int(max_iters), REFRESH_EVERY, SING_TOL)
    if status == 3:
        raise NoInteriorStart("iterate became singular")
    converged = status == 0

    z_final = ldet_psd(inst.fim(x))
    return RelaxSolution(xC=x, z_primal=z_final, iterations=it,
                         converged=converged, gap=gap)


def _best_nu(c, l, u, s):
    """Minimize ``f(nu) = sum u_i (c_i - nu)_+ - sum l_i (nu - c_i)_+ + nu s``.

    ``f`` is convex piecewise linear (``u >= l``) with breakpoints at the
    ``c_i``; the minimum sits where the slope changes sign.
    """
    order = np.argsort(c, kind="stable")
    cs = c[order]
    us = u[order].astype(float)
    ls = l[order].astype(float)
    # at nu = cs[k]: upper part over indices > k, lower part over indices < k
    suf_u = np.concatenate((np.cumsum(us[::-1])[::-1][1:], [0.0]))
    suf_uc = np.concatenate((np.cumsum((us * cs)[::-1])[::-1][1:], [0.0]))
    pre_l = np.concatenate(([0.0], np.cumsum(ls)[:-1]))
    pre_lc = np.concatenate(([0.0], np.cumsum(ls * cs)[:-1]))
    f = (suf_uc - cs * suf_u) - (cs * pre_l - pre_lc) + cs * s
    k = int(np.argmin(f))
    return float(cs[k]), float(f[k])


def dual_objective(inst: Instance, cert: DualCertificate, l=None, u=None) -> float:
    l, u = _box(inst, l, u)
    sign, logdet = np.linalg.slogdet(cert.Lambda)
    val = -logdet + cert.lam @ u - cert.theta @ l + cert.nu * inst.s - inst.m
    if inst.base is not None:
        val += float(np.sum(cert.Lambda * inst.base))
    return float(val)


def recover_dual(inst: Instance, xC, l=None, u=None) -> DualCertificate:
    """Dual feasible point from ``Lambda = B(xC)^{-1}`` and the best ``nu``."""
    l, u = _box(inst, l, u)
    fac = _factor(inst, xC)
    if fac is None:
        raise SingularPoint("information matrix singular at xC")
    Lam, ldet_B = fac
    Lam = 0.5 * (Lam + Lam.T)
    c = np.einsum("ij,jk,ik->i", inst.A, Lam, inst.A)
    nu, f = _best_nu(c, l, u, inst.s)
    lam = np.maximum(0.0, c - nu)
    theta = np.maximum(0.0, nu - c)
    # -ldet Lambda = ldet B
    zeta = ldet_B + f - inst.m
    if inst.base is not None:
        zeta += float(np.sum(Lam * inst.base))
    return DualCertificate(Lam, lam, theta, nu, float(zeta))
