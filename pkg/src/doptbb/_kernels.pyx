# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled rank-one factorization kernels (see ``_kernels_py`` for the reference)."""
import numpy as np
from libc.math cimport sqrt, log, log1p, hypot, fabs, fmax, fmin, INFINITY
from libc.stdlib cimport malloc, free, qsort


def chol_update(double[:, ::1] L, double[::1] x):
    cdef Py_ssize_t m = L.shape[0], k, t
    cdef double lkk, r, c, s, lt
    for k in range(m):
        lkk = L[k, k]
        r = hypot(lkk, x[k])
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for t in range(k + 1, m):
            lt = (L[t, k] + s * x[t]) / c
            L[t, k] = lt
            x[t] = c * x[t] - s * lt


def chol_downdate(double[:, ::1] L, double[::1] x, double tol=0.0):
    cdef Py_ssize_t m = L.shape[0], k, t
    cdef double lkk, r2, r, c, s, lt
    for k in range(m):
        lkk = L[k, k]
        r2 = lkk * lkk - x[k] * x[k]
        if r2 <= tol:
            return False
        r = sqrt(r2)
        c = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for t in range(k + 1, m):
            lt = (L[t, k] - s * x[t]) / c
            L[t, k] = lt
            x[t] = c * x[t] - s * lt
    return True


def chol_downdate_logdet(double[:, ::1] L, x_in, double tol=0.0):
    cdef double[::1] x = np.array(x_in, dtype=np.float64)
    cdef Py_ssize_t m = L.shape[0], k, t
    cdef double lkk, r2, r, c, s, lt, total = 0.0
    for k in range(m):
        lkk = L[k, k]
        r2 = lkk * lkk - x[k] * x[k]
        if r2 <= tol:
            return -INFINITY
        total += log(r2)
        r = sqrt(r2)
        c = r / lkk
        s = x[k] / lkk
        for t in range(k + 1, m):
            lt = (L[t, k] - s * x[t]) / c
            x[t] = c * x[t] - s * lt
    return total


cdef inline void _rot_rows(double[:, ::1] R, Py_ssize_t i, Py_ssize_t j,
                           Py_ssize_t start, double c, double s) nogil:
    cdef Py_ssize_t t
    cdef double a, b
    for t in range(start, R.shape[1]):
        a = R[i, t]
        b = R[j, t]
        R[i, t] = c * a + s * b
        R[j, t] = -s * a + c * b


cdef inline void _rot_cols(double[:, ::1] Q, Py_ssize_t i, Py_ssize_t j,
                           double c, double s) nogil:
    cdef Py_ssize_t t
    cdef double a, b
    for t in range(Q.shape[0]):
        a = Q[t, i]
        b = Q[t, j]
        Q[t, i] = c * a + s * b
        Q[t, j] = -s * a + c * b


def qr_rank1_update(double[:, ::1] Q, double[:, ::1] R, u, v_in):
    cdef Py_ssize_t s = R.shape[0], m = R.shape[1], k, lim
    cdef double[::1] w = np.ascontiguousarray(np.asarray(Q).T @ np.asarray(u, dtype=np.float64))
    cdef double[::1] v = np.ascontiguousarray(v_in, dtype=np.float64)
    cdef double c, sn, r, a, b
    with nogil:
        for k in range(s - 1, 0, -1):
            b = w[k]
            if b == 0.0:
                continue
            a = w[k - 1]
            r = hypot(a, b)
            c = a / r
            sn = b / r
            w[k - 1] = r
            w[k] = 0.0
            if k - 1 < m:
                _rot_rows(R, k - 1, k, k - 1, c, sn)
            _rot_cols(Q, k - 1, k, c, sn)
        for k in range(m):
            R[0, k] += w[0] * v[k]
        lim = m if m < s - 1 else s - 1
        for k in range(lim):
            b = R[k + 1, k]
            if b == 0.0:
                continue
            a = R[k, k]
            r = hypot(a, b)
            c = a / r
            sn = b / r
            _rot_rows(R, k, k + 1, k, c, sn)
            R[k + 1, k] = 0.0
            _rot_cols(Q, k, k + 1, c, sn)


cdef struct _Slot:
    double g
    double w


cdef int _cmp_desc(const void *a, const void *b) noexcept nogil:
    cdef double ga = (<_Slot *> a).g, gb = (<_Slot *> b).g
    if ga > gb:
        return -1
    if ga < gb:
        return 1
    return 0


cdef double _lmo_value(double[::1] g, double[::1] l, double[::1] width, double left,
                       _Slot *slots) noexcept nogil:
    cdef Py_ssize_t n = g.shape[0], k
    cdef double total = 0.0, take
    for k in range(n):
        total += g[k] * l[k]
        slots[k].g = g[k]
        slots[k].w = width[k]
    qsort(slots, n, sizeof(_Slot), _cmp_desc)
    for k in range(n):
        if left <= 0.0:
            break
        take = slots[k].w if slots[k].w < left else left
        total += take * slots[k].g
        left -= take
    return total


cdef int _refresh(const double[:, ::1] A, const double[:, ::1] base, double[::1] x,
                  double[:, ::1] Binv, double[::1] g, double[:, ::1] L,
                  double sing_tol, double *z) noexcept nogil:
    """Rebuild Binv, g and z from x; returns 0 on success, 1 if singular."""
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j, k
    cdef double acc, dmax = 0.0, dmin = INFINITY, logdet = 0.0
    for i in range(m):
        for j in range(i + 1):
            acc = base[i, j]
            for k in range(n):
                acc += x[k] * A[k, i] * A[k, j]
            L[i, j] = acc
    # in-place Cholesky of the lower triangle
    for j in range(m):
        acc = L[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if acc <= 0.0:
            return 1
        if acc > dmax:
            dmax = acc
        if acc < dmin:
            dmin = acc
        logdet += log(acc)
        L[j, j] = sqrt(acc)
        for i in range(j + 1, m):
            acc = L[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    if dmin <= sing_tol * dmax:
        return 1
    # invert L in place (lower triangular), then Binv = L^-T L^-1
    for j in range(m):
        L[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, m):
            acc = 0.0
            for k in range(j, i):
                acc -= L[i, k] * L[k, j]
            L[i, j] = acc / L[i, i]
    for i in range(m):
        for j in range(i + 1):
            acc = 0.0
            for k in range(i, m):
                acc += L[k, i] * L[k, j]
            Binv[i, j] = acc
            Binv[j, i] = acc
    for k in range(n):
        acc = 0.0
        for i in range(m):
            for j in range(m):
                acc += A[k, i] * Binv[i, j] * A[k, j]
        g[k] = acc
    z[0] = logdet
    return 0


def pairwise_fw(const double[:, ::1] A, const double[:, ::1] base, double[:, ::1] Binv,
                double[::1] g, double[::1] x, double[::1] l, double[::1] u,
                double s, double tol, double z, long max_iters, long refresh_every,
                double sing_tol):
    cdef Py_ssize_t n = A.shape[0], m = A.shape[1], i, j, k, r, c
    cdef long it = 0
    cdef int status = 1
    cdef double gap = INFINITY, left = s, gx, best_up, best_dn
    cdef double alpha, beta, gamma, tmax, curv, t, dq, det, k11, k12, k22, ga, gb
    cdef double[::1] width = np.empty(n)
    cdef double[::1] pa = np.empty(m)
    cdef double[::1] pb = np.empty(m)
    cdef double[:, ::1] work = np.zeros((m, m))
    cdef _Slot *slots = <_Slot *> malloc(n * sizeof(_Slot))
    if slots == NULL:
        raise MemoryError()
    for k in range(n):
        width[k] = u[k] - l[k]
        left -= l[k]
    try:
        with nogil:
            while it < max_iters:
                it += 1
                gx = 0.0
                for k in range(n):
                    gx += g[k] * x[k]
                gap = _lmo_value(g, l, width, left, slots) - gx
                if gap <= tol * fmax(1.0, fabs(z)):
                    status = 0
                    break
                i = -1
                j = -1
                best_up = -INFINITY
                best_dn = INFINITY
                for k in range(n):
                    if x[k] < u[k] and g[k] > best_up:
                        best_up = g[k]
                        i = k
                    if x[k] > l[k] and g[k] < best_dn:
                        best_dn = g[k]
                        j = k
                if i < 0 or j < 0 or i == j or g[i] <= g[j]:
                    status = 0
                    break
                gamma = 0.0
                for r in range(m):
                    pa[r] = 0.0
                    pb[r] = 0.0
                    for c in range(m):
                        pa[r] += Binv[r, c] * A[i, c]
                        pb[r] += Binv[r, c] * A[j, c]
                for r in range(m):
                    gamma += A[i, r] * pb[r]
                alpha = g[i]
                beta = g[j]
                tmax = fmin(u[i] - x[i], x[j] - l[j])
                curv = alpha * beta - gamma * gamma
                if curv <= 0.0:
                    t = tmax
                else:
                    t = fmin(tmax, (alpha - beta) / (2.0 * curv))
                dq = t * ((alpha - beta) - curv * t)
                if t <= 0.0 or dq <= 0.0:
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
                    if _refresh(A, base, x, Binv, g, work, sing_tol, &z):
                        status = 3
                        break
                    continue
                det = 1.0 + t * (alpha - beta) - t * t * curv
                k11 = t * (1.0 - t * beta) / det
                k22 = -t * (1.0 + t * alpha) / det
                k12 = t * t * gamma / det
                for r in range(m):
                    for c in range(m):
                        Binv[r, c] -= (k11 * pa[r] * pa[c] + k12 * (pa[r] * pb[c] + pb[r] * pa[c])
                                       + k22 * pb[r] * pb[c])
                for k in range(n):
                    ga = 0.0
                    gb = 0.0
                    for r in range(m):
                        ga += A[k, r] * pa[r]
                        gb += A[k, r] * pb[r]
                    g[k] -= k11 * ga * ga + 2.0 * k12 * ga * gb + k22 * gb * gb
    finally:
        free(slots)
    return z, it, status, gap
