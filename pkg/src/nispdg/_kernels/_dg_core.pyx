# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels for the DG semidiscrete operator.

Model dispatch is by integer id (0 = linear advection, 1 = Burgers,
2 = shallow water) with a single scalar parameter (advection speed or
gravity). The pure-Python fallback in ``python_ref`` mirrors the semantics.
"""

import numpy as np

from libc.math cimport fabs, sqrt

DEF MAX_M = 4


cdef inline int _flux(int model_id, double param, double* u, double* f) noexcept nogil:
    if model_id == 0:
        f[0] = param * u[0]
    elif model_id == 1:
        f[0] = 0.5 * u[0] * u[0]
    else:
        if u[0] <= 0.0:
            return 1
        f[0] = u[1]
        f[1] = u[1] * u[1] / u[0] + 0.5 * param * u[0] * u[0]
    return 0


cdef inline double _speed(int model_id, double param, double* u) noexcept nogil:
    if model_id == 0:
        return fabs(param)
    elif model_id == 1:
        return fabs(u[0])
    else:
        return fabs(u[1] / u[0]) + sqrt(param * u[0])


cdef int _rhs_impl(const double[:, :, ::1] coeffs, const double[:, ::1] phi_q,
                   const double[:, ::1] dphi_q, const double[::1] w_q,
                   const double[::1] phi_l, const double[::1] phi_r, double h,
                   int model_id, double param,
                   double[:, ::1] trace_l, double[:, ::1] trace_r,
                   double[:, ::1] fhat, double[:, :, ::1] vol,
                   double[:, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = coeffs.shape[0]
    cdef Py_ssize_t k = coeffs.shape[1]
    cdef Py_ssize_t m = coeffs.shape[2]
    cdef Py_ssize_t nq = w_q.shape[0]
    cdef Py_ssize_t j, i, q, c, jn, jp
    cdef double u[MAX_M]
    cdef double ur[MAX_M]
    cdef double fa[MAX_M]
    cdef double fb[MAX_M]
    cdef double lam, la, lb, wq

    # per cell: traces, volume flux terms, and admissibility of every
    # evaluated point (reported against the owning cell)
    for j in range(n):
        for c in range(m):
            trace_l[j, c] = 0.0
            trace_r[j, c] = 0.0
        for i in range(k):
            for c in range(m):
                trace_l[j, c] += coeffs[j, i, c] * phi_l[i]
                trace_r[j, c] += coeffs[j, i, c] * phi_r[i]
        if model_id == 2 and (trace_l[j, 0] <= 0.0 or trace_r[j, 0] <= 0.0):
            return <int> (j + 1)
        for q in range(nq):
            for c in range(m):
                u[c] = 0.0
            for i in range(k):
                for c in range(m):
                    u[c] += coeffs[j, i, c] * phi_q[i, q]
            if _flux(model_id, param, u, fa):
                return <int> (j + 1)
            wq = w_q[q]
            for i in range(k):
                for c in range(m):
                    vol[j, i, c] += wq * fa[c] * dphi_q[i, q]

    # interface fluxes: fhat[j] lives at the right face of cell j;
    # all states were validated above
    for j in range(n):
        jn = j + 1 if j + 1 < n else 0
        for c in range(m):
            u[c] = trace_r[j, c]
            ur[c] = trace_l[jn, c]
        _flux(model_id, param, u, fa)
        _flux(model_id, param, ur, fb)
        la = _speed(model_id, param, u)
        lb = _speed(model_id, param, ur)
        lam = la if la > lb else lb
        for c in range(m):
            fhat[j, c] = 0.5 * (fa[c] + fb[c]) - 0.5 * lam * (ur[c] - u[c])

    for j in range(n):
        jp = j - 1 if j > 0 else n - 1
        for i in range(k):
            for c in range(m):
                out[j, i, c] = (
                    vol[j, i, c]
                    - (fhat[j, c] * phi_r[i] - fhat[jp, c] * phi_l[i])
                ) / h
    return 0


def dg_rhs(const double[:, :, ::1] coeffs, const double[:, ::1] phi_q, const double[:, ::1] dphi_q,
           const double[::1] w_q, const double[::1] phi_l, const double[::1] phi_r,
           double h, int model_id, double param, double[:, :, ::1] out):
    """Semidiscrete RKDG right-hand side with local Lax-Friedrichs fluxes.

    Writes the rate into ``out`` and returns 0, or 1 + (cell index) of the
    first cell with an inadmissible evaluated state.
    """
    cdef Py_ssize_t n = coeffs.shape[0]
    cdef Py_ssize_t k = coeffs.shape[1]
    cdef Py_ssize_t m = coeffs.shape[2]
    if m > MAX_M:
        raise ValueError("compiled kernel supports at most 4 components")
    trace_l = np.empty((n, m))
    trace_r = np.empty((n, m))
    fhat = np.empty((n, m))
    vol = np.zeros((n, k, m))
    return _rhs_impl(coeffs, phi_q, dphi_q, w_q, phi_l, phi_r, h,
                     model_id, param, trace_l, trace_r, fhat, vol, out)


cdef int _speed_impl(const double[:, :, ::1] coeffs, const double[:, ::1] phi_q,
                     const double[::1] phi_l, const double[::1] phi_r,
                     int model_id, double param, double* best) noexcept nogil:
    cdef Py_ssize_t n = coeffs.shape[0]
    cdef Py_ssize_t k = coeffs.shape[1]
    cdef Py_ssize_t m = coeffs.shape[2]
    cdef Py_ssize_t nq = phi_q.shape[1]
    cdef Py_ssize_t j, i, q, c
    cdef double u[MAX_M]
    cdef double s
    best[0] = 0.0
    for j in range(n):
        for q in range(nq + 2):
            for c in range(m):
                u[c] = 0.0
            if q < nq:
                for i in range(k):
                    for c in range(m):
                        u[c] += coeffs[j, i, c] * phi_q[i, q]
            elif q == nq:
                for i in range(k):
                    for c in range(m):
                        u[c] += coeffs[j, i, c] * phi_l[i]
            else:
                for i in range(k):
                    for c in range(m):
                        u[c] += coeffs[j, i, c] * phi_r[i]
            if model_id == 2 and u[0] <= 0.0:
                return <int> (j + 1)
            s = _speed(model_id, param, u)
            if s > best[0]:
                best[0] = s
    return 0


def max_speed(const double[:, :, ::1] coeffs, const double[:, ::1] phi_q,
              const double[::1] phi_l, const double[::1] phi_r,
              int model_id, double param):
    """(status, max wave speed) over volume quadrature points and traces."""
    cdef double best = 0.0
    cdef int status
    if coeffs.shape[2] > MAX_M:
        raise ValueError("compiled kernel supports at most 4 components")
    status = _speed_impl(coeffs, phi_q, phi_l, phi_r, model_id, param, &best)
    return status, best
