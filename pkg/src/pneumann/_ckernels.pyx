# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled p-energy kernel; same contract as ``_kernels_py.p_energy``.

Triangles in the plane (3 vertices, 2 gradient components) and intervals
(2 vertices, 1 component) have unrolled loops; other shapes take the
generic path.
"""

import numpy as np
from libc.math cimport exp, log, pow, sqrt


cdef inline double _tpow(double t, double e, int mode) nogil:
    """``t**e`` for ``t > 0`` with exact shortcuts for the common exponents."""
    if mode == 0:  # e = 0
        return 1.0
    if mode == 1:  # e = 1
        return t
    if mode == 2:  # e = 1/2
        return sqrt(t)
    if mode == 3:  # e = -1/4
        return 1.0 / sqrt(sqrt(t))
    if mode == 4:  # e = -1/2
        return 1.0 / sqrt(t)
    return exp(e * log(t))


cdef int _mode(double e):
    if e == 0.0:
        return 0
    if e == 1.0:
        return 1
    if e == 0.5:
        return 2
    if e == -0.25:
        return 3
    if e == -0.5:
        return 4
    return 5


def p_energy(const long long[:, ::1] cells, const double[:, :, ::1] grads,
             const double[::1] vol, const double[::1] u, double p, double eps,
             bint want_grad=True, bint want_hdiag=False):
    cdef Py_ssize_t M = cells.shape[0], K = cells.shape[1], D = grads.shape[2]
    cdef Py_ssize_t n = u.shape[0]
    cdef double E = 0.0, eps2 = eps * eps, epsp = pow(eps, p)
    cdef double half_pm2 = 0.5 * p - 1.0
    cdef int mode = _mode(half_pm2)
    cdef int n_sing = 0
    if D > 3:
        raise ValueError("at most 3 gradient components are supported")
    grad_arr = np.zeros(n) if want_grad else None
    hd_arr = np.zeros(n) if want_hdiag else None
    cdef double[::1] grad = grad_arr if want_grad else np.zeros(0)
    cdef double[::1] hd = hd_arr if want_hdiag else np.zeros(0)
    if K == 3 and D == 2:
        n_sing = _tri(cells, grads, vol, u, p, eps2, epsp, half_pm2, mode, want_grad, want_hdiag, grad, hd, &E)
    elif K == 2 and D == 1:
        n_sing = _seg(cells, grads, vol, u, p, eps2, epsp, half_pm2, mode, want_grad, want_hdiag, grad, hd, &E)
    else:
        n_sing = _generic(cells, grads, vol, u, p, eps2, epsp, half_pm2, mode, want_grad, want_hdiag, grad, hd, &E)
    return E, grad_arr, hd_arr, n_sing


cdef int _tri(const long long[:, ::1] cells, const double[:, :, ::1] G, const double[::1] vol,
              const double[::1] u, double p, double eps2, double epsp, double e, int mode,
              bint want_grad, bint want_hdiag, double[::1] grad, double[::1] hd, double* E_out) nogil:
    cdef Py_ssize_t m, M = cells.shape[0]
    cdef long long i0, i1, i2
    cdef double v0, v1, t, tp, rho, g0, g1, g2, E = 0.0, c
    cdef int n_sing = 0
    cdef bint deriv = want_grad or want_hdiag
    for m in range(M):
        i0 = cells[m, 0]
        i1 = cells[m, 1]
        i2 = cells[m, 2]
        v0 = u[i0] * G[m, 0, 0] + u[i1] * G[m, 1, 0] + u[i2] * G[m, 2, 0]
        v1 = u[i0] * G[m, 0, 1] + u[i1] * G[m, 1, 1] + u[i2] * G[m, 2, 1]
        t = v0 * v0 + v1 * v1 + eps2
        if t == 0.0:
            E -= vol[m] * epsp
            if deriv and p < 2.0:
                n_sing += 1
            continue
        # t^(p/2) = t * t^(p/2 - 1): one power per cell serves E and the derivatives
        tp = _tpow(t, e, mode)
        E += vol[m] * (tp * t - epsp)
        if not deriv:
            continue
        rho = vol[m] * tp
        g0 = G[m, 0, 0] * v0 + G[m, 0, 1] * v1
        g1 = G[m, 1, 0] * v0 + G[m, 1, 1] * v1
        g2 = G[m, 2, 0] * v0 + G[m, 2, 1] * v1
        if want_grad:
            grad[i0] += rho * g0
            grad[i1] += rho * g1
            grad[i2] += rho * g2
        if want_hdiag:
            c = (p - 2.0) / t
            hd[i0] += rho * (G[m, 0, 0] * G[m, 0, 0] + G[m, 0, 1] * G[m, 0, 1] + c * g0 * g0)
            hd[i1] += rho * (G[m, 1, 0] * G[m, 1, 0] + G[m, 1, 1] * G[m, 1, 1] + c * g1 * g1)
            hd[i2] += rho * (G[m, 2, 0] * G[m, 2, 0] + G[m, 2, 1] * G[m, 2, 1] + c * g2 * g2)
    E_out[0] = E
    return n_sing


cdef int _seg(const long long[:, ::1] cells, const double[:, :, ::1] G, const double[::1] vol,
              const double[::1] u, double p, double eps2, double epsp, double e, int mode,
              bint want_grad, bint want_hdiag, double[::1] grad, double[::1] hd, double* E_out) nogil:
    cdef Py_ssize_t m, M = cells.shape[0]
    cdef long long i0, i1
    cdef double v, t, tp, rho, g0, g1, E = 0.0, c
    cdef int n_sing = 0
    cdef bint deriv = want_grad or want_hdiag
    for m in range(M):
        i0 = cells[m, 0]
        i1 = cells[m, 1]
        v = u[i0] * G[m, 0, 0] + u[i1] * G[m, 1, 0]
        t = v * v + eps2
        if t == 0.0:
            E -= vol[m] * epsp
            if deriv and p < 2.0:
                n_sing += 1
            continue
        tp = _tpow(t, e, mode)
        E += vol[m] * (tp * t - epsp)
        if not deriv:
            continue
        rho = vol[m] * tp
        g0 = G[m, 0, 0] * v
        g1 = G[m, 1, 0] * v
        if want_grad:
            grad[i0] += rho * g0
            grad[i1] += rho * g1
        if want_hdiag:
            c = (p - 2.0) / t
            hd[i0] += rho * (G[m, 0, 0] * G[m, 0, 0] + c * g0 * g0)
            hd[i1] += rho * (G[m, 1, 0] * G[m, 1, 0] + c * g1 * g1)
    E_out[0] = E
    return n_sing


cdef int _generic(const long long[:, ::1] cells, const double[:, :, ::1] G, const double[::1] vol,
                  const double[::1] u, double p, double eps2, double epsp, double e, int mode,
                  bint want_grad, bint want_hdiag, double[::1] grad, double[::1] hd, double* E_out) nogil:
    cdef Py_ssize_t m, a, d, M = cells.shape[0], K = cells.shape[1], D = G.shape[2]
    cdef long long idx
    cdef double v[3]
    cdef double s, t, tp, rho, gv, g2, E = 0.0
    cdef int n_sing = 0
    cdef bint deriv = want_grad or want_hdiag
    for m in range(M):
        for d in range(D):
            v[d] = 0.0
        for a in range(K):
            idx = cells[m, a]
            for d in range(D):
                v[d] += u[idx] * G[m, a, d]
        s = 0.0
        for d in range(D):
            s += v[d] * v[d]
        t = s + eps2
        if t == 0.0:
            E -= vol[m] * epsp
            if deriv and p < 2.0:
                n_sing += 1
            continue
        tp = _tpow(t, e, mode)
        E += vol[m] * (tp * t - epsp)
        if not deriv:
            continue
        rho = vol[m] * tp
        for a in range(K):
            idx = cells[m, a]
            gv = 0.0
            for d in range(D):
                gv += G[m, a, d] * v[d]
            if want_grad:
                grad[idx] += rho * gv
            if want_hdiag:
                g2 = 0.0
                for d in range(D):
                    g2 += G[m, a, d] * G[m, a, d]
                hd[idx] += rho * (g2 + (p - 2.0) * gv * gv / t)
    E_out[0] = E
    return n_sing
