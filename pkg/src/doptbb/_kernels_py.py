"""Pure-Python (numpy) versions of the rank-one factorization kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``DOPTBB_PURE_PYTHON`` is set.
"""
from math import hypot, log, log1p, sqrt

import numpy as np


def chol_update(L, x):
    """Overwrite lower-triangular ``L`` with the factor of ``L L^T + x x^T``.

    ``x`` is used as workspace and destroyed.
    """
    m = L.shape[0]
    for k in range(m):
        lkk = L[k, k]
        r = hypot(lkk, x[k])
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        if k + 1 < m:
            col = L[k + 1:, k]
            col += s * x[k + 1:]
            col /= c
            x[k + 1:] = c * x[k + 1:] - s * col


def chol_downdate(L, x, tol=0.0):
    """Overwrite ``L`` with the factor of ``L L^T - x x^T``.

    Returns False (leaving ``L`` partially modified) when a new pivot
    ``L_kk^2 - x_k^2`` is ``<= tol``.
    """
    m = L.shape[0]
    for k in range(m):
        lkk = L[k, k]
        r2 = lkk * lkk - x[k] * x[k]
        if r2 <= tol:
            return False
        r = sqrt(r2)
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        if k + 1 < m:
            col = L[k + 1:, k]
            col -= s * x[k + 1:]
            col /= c
            x[k + 1:] = c * x[k + 1:] - s * col
    return True


def chol_downdate_logdet(L, x, tol=0.0):
    """log det of ``L L^T - x x^T`` without touching ``L``; -inf on failure."""
    m = L.shape[0]
    x = np.array(x, dtype=float)
    total = 0.0
    for k in range(m):
        lkk = L[k, k]
        r2 = lkk * lkk - x[k] * x[k]
        if r2 <= tol:
            return -np.inf
        total += log(r2)
        if k + 1 < m:
            r = sqrt(r2)
            c = r / lkk
            s = x[k] / lkk
            col = (L[k + 1:, k] - s * x[k + 1:]) / c
            x[k + 1:] = c * x[k + 1:] - s * col
    return total


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = hypot(a, b)
    return a / r, b / r


def qr_rank1_update(Q, R, u, v):
    """Overwrite (Q, R) with the full QR factors of ``Q R + u v^T``.

    ``Q`` is s-by-s orthogonal, ``R`` is s-by-m upper triangular. ``u`` and
    ``v`` are not modified.
    """
    s, m = R.shape
    w = Q.T @ u
    # zero w from the bottom; R becomes upper Hessenberg
    for k in range(s - 1, 0, -1):
        c, sn = _givens(w[k - 1], w[k])
        if sn == 0.0:
            continue
        w[k - 1] = c * w[k - 1] + sn * w[k]
        w[k] = 0.0
        if k - 1 < m:
            lo = k - 1
            r0 = R[k - 1, lo:].copy()
            r1 = R[k, lo:]
            R[k - 1, lo:] = c * r0 + sn * r1
            R[k, lo:] = -sn * r0 + c * r1
        q0 = Q[:, k - 1].copy()
        q1 = Q[:, k]
        Q[:, k - 1] = c * q0 + sn * q1
        Q[:, k] = -sn * q0 + c * q1
    R[0, :] += w[0] * v
    # chase the subdiagonal back to triangular form
    for k in range(min(m, s - 1)):
        c, sn = _givens(R[k, k], R[k + 1, k])
        if sn == 0.0:
            continue
        r0 = R[k, k:].copy()
        r1 = R[k + 1, k:]
        R[k, k:] = c * r0 + sn * r1
        R[k + 1, k:] = -sn * r0 + c * r1
        R[k + 1, k] = 0.0
        q0 = Q[:, k].copy()
        q1 = Q[:, k + 1]
        Q[:, k] = c * q0 + sn * q1
        Q[:, k + 1] = -sn * q0 + c * q1


def _lmo_value(g, l, width, left):
    """``max g . y`` over ``{sum(y) == sum(l) + left, l <= y <= l + width}``."""
    order = np.argsort(-g, kind="stable")
    room = width[order]
    add = np.clip(left - (np.cumsum(room) - room), 0.0, room)
    return float(g @ l + add @ g[order])


def _refresh(A, base, x, sing_tol):
    B = base + A.T @ (x[:, None] * A)
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(L) ** 2
    if d.min() <= sing_tol * d.max():
        return None
    Linv = np.linalg.inv(L)
    Binv = Linv.T @ Linv
    g = ((A @ Binv) * A).sum(axis=1)
    return Binv, g, float(np.log(d).sum())


def pairwise_fw(A, base, Binv, g, x, l, u, s, tol, z, max_iters, refresh_every,
                sing_tol):
    """Pairwise conditional gradient on the capped simplex, in place.

    ``Binv``, ``g`` (gradient) and ``x`` are updated in place; ``z`` is the
    objective at the incoming ``x``. Each step moves mass from the smallest
    gradient coordinate that can decrease to the largest that can increase,
    with an exact line search, and updates ``Binv`` by Woodbury. Returns
    ``(z, iterations, status, gap)`` with status 0 converged, 1 iteration
    limit, 2 no further ascent possible, 3 singular iterate at a refresh.
    """
    width = u - l
    left = s - l.sum()
    gap = np.inf
    it = 0
    status = 1
    for it in range(1, max_iters + 1):
        gap = _lmo_value(g, l, width, left) - float(g @ x)
        if gap <= tol * max(1.0, abs(z)):
            status = 0
            break
        gu = np.where(x < u, g, -np.inf)
        gd = np.where(x > l, g, np.inf)
        i = int(np.argmax(gu))
        j = int(np.argmin(gd))
        if not (np.isfinite(gu[i]) and np.isfinite(gd[j])) or i == j or g[i] <= g[j]:
            status = 0
            break
        a, b = A[i], A[j]
        pa, pb = Binv @ a, Binv @ b
        alpha, beta, gamma = g[i], g[j], float(a @ pb)
        tmax = min(u[i] - x[i], x[j] - l[j])
        # det ratio along the edge: 1 + (alpha - beta) t - (alpha beta - gamma^2) t^2
        curv = alpha * beta - gamma * gamma
        t = tmax if curv <= 0 else min(tmax, (alpha - beta) / (2.0 * curv))
        dq = t * ((alpha - beta) - curv * t)
        if t <= 0 or dq <= 0:
            status = 2
            break
        x[i] += t
        x[j] -= t
        if t == tmax:
            if u[i] - x[i] <= 1e-12:
                x[i] = u[i]
            if x[j] - l[j] <= 1e-12:
                x[j] = l[j]
        z += log1p(dq)
        if it % refresh_every == 0:
            fresh = _refresh(A, base, x, sing_tol)
            if fresh is None:
                status = 3
                break
            Binv[...], g[...], z = fresh
            continue
        # Woodbury for B + t a a^T - t b b^T: Binv -= P K P^T with
        # K = (I + C M)^{-1} C, C = diag(t, -t), M = [[alpha, gamma], [gamma, beta]]
        det = 1.0 + t * (alpha - beta) - t * t * curv
        k11 = t * (1.0 - t * beta) / det
        k22 = -t * (1.0 + t * alpha) / det
        k12 = t * t * gamma / det
        Binv -= (k11 * np.outer(pa, pa) + k12 * (np.outer(pa, pb) + np.outer(pb, pa))
                 + k22 * np.outer(pb, pb))
        ga, gb = A @ pa, A @ pb
        g -= k11 * ga * ga + 2.0 * k12 * ga * gb + k22 * gb * gb
    return z, it, status, gap
