# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same signatures and algorithm as ``_pykernels``."""

from libc.math cimport exp, cos, sin, fabs, fmax

import numpy as np


def decay_weighted_square_sum(double offset, double t_sample, long n_samples, double alpha):
    cdef double total = 0.0, t, u, w
    cdef double step = exp(2.0 * alpha * t_sample)
    cdef long m
    for m in range(n_samples):
        t = m * t_sample
        # multiplicative recurrence, re-anchored so rounding cannot build up
        if m % 64 == 0:
            w = exp(2.0 * alpha * t)
        else:
            w *= step
        u = offset + t
        total += u * u * w
    return total


cdef int _solve3(double[3][3] a, double[3] b, double[3] out) noexcept:
    # Gaussian elimination with partial pivoting; returns 0 if singular
    cdef double m[3][4]
    cdef int i, j, k, piv
    cdef double best, tmp, f
    for i in range(3):
        for j in range(3):
            m[i][j] = a[i][j]
        m[i][3] = b[i]
    for k in range(3):
        piv = k
        best = fabs(m[k][k])
        for i in range(k + 1, 3):
            if fabs(m[i][k]) > best:
                best = fabs(m[i][k])
                piv = i
        if best == 0.0:
            return 0
        if piv != k:
            for j in range(4):
                tmp = m[k][j]
                m[k][j] = m[piv][j]
                m[piv][j] = tmp
        for i in range(k + 1, 3):
            f = m[i][k] / m[k][k]
            for j in range(k, 4):
                m[i][j] -= f * m[k][j]
    for i in range(2, -1, -1):
        tmp = m[i][3]
        for j in range(i + 1, 3):
            tmp -= m[i][j] * out[j]
        out[i] = tmp / m[i][i]
    return 1


cdef double _eval(const double[::1] xr, const double[::1] xi, double[::1] gr, double[::1] gi,
                  double c, double a, double d, double t_sample, double lever, double atten) noexcept:
    # fills the unit-amplitude basis g and returns the residual cost for amplitude c
    cdef Py_ssize_t m, n = xr.shape[0]
    cdef double t, mag, ph, rr, ri, cost = 0.0
    for m in range(n):
        t = m * t_sample
        mag = atten * exp(a * t)
        ph = d * (lever + t)
        gr[m] = mag * cos(ph)
        gi[m] = mag * sin(ph)
        rr = xr[m] - c * gr[m]
        ri = xi[m] - c * gi[m]
        cost += rr * rr + ri * ri
    return cost


cdef inline double _scale(int i, double c, double a, double d, double floor) noexcept:
    if i == 0:
        return fabs(c)
    if i == 1:
        return fmax(fabs(a), floor)
    return fmax(fmax(fabs(d), fabs(a)), floor)


def lm_fit(re, im, double t_sample, double lever, double atten,
           double c0, double a0, double d0, double xtol=1e-10, int maxiter=500):
    cdef const double[::1] xr = np.ascontiguousarray(re, dtype=np.float64)
    cdef const double[::1] xi = np.ascontiguousarray(im, dtype=np.float64)
    cdef Py_ssize_t n = xr.shape[0], m
    cdef double[::1] gr = np.empty(n), gi = np.empty(n)
    cdef double[::1] hr = np.empty(n), hi = np.empty(n)
    cdef double p[3]
    cdef double trial[3]
    cdef double step[3]
    cdef double grad[3]
    cdef double jtj[3][3]
    cdef double damped[3][3]
    cdef double jr[3]
    cdef double ji[3]
    cdef double diag[3]
    cdef double cost, cost_new, lam = 1e-3, t, u, fr, fi, rr, ri
    cdef double rate_floor = 1.0 / ((n - 1) * t_sample + lever)
    cdef int it = 0, i, j, accepted, small, converged = 0
    p[0] = c0
    p[1] = a0
    p[2] = d0
    cost = _eval(xr, xi, gr, gi, p[0], p[1], p[2], t_sample, lever, atten)
    while it < maxiter:
        it += 1
        for i in range(3):
            grad[i] = 0.0
            for j in range(3):
                jtj[i][j] = 0.0
        for m in range(n):
            t = m * t_sample
            u = lever + t
            fr = p[0] * gr[m]
            fi = p[0] * gi[m]
            rr = xr[m] - fr
            ri = xi[m] - fi
            # columns: g, t f, i u f
            jr[0] = gr[m]
            ji[0] = gi[m]
            jr[1] = t * fr
            ji[1] = t * fi
            jr[2] = -u * fi
            ji[2] = u * fr
            for i in range(3):
                grad[i] += jr[i] * rr + ji[i] * ri
                for j in range(i, 3):
                    jtj[i][j] += jr[i] * jr[j] + ji[i] * ji[j]
        for i in range(3):
            for j in range(i):
                jtj[i][j] = jtj[j][i]
            diag[i] = fmax(jtj[i][i], 1e-300)
        accepted = 0
        while True:
            for i in range(3):
                for j in range(3):
                    damped[i][j] = jtj[i][j]
                damped[i][i] += lam * diag[i]
            if not _solve3(damped, grad, step):
                break
            for i in range(3):
                trial[i] = p[i] + step[i]
            cost_new = _eval(xr, xi, hr, hi, trial[0], trial[1], trial[2], t_sample, lever, atten)
            if cost_new <= cost:
                accepted = 1
                break
            lam *= 4.0
            if lam > 1e16:
                break
        if not accepted:
            converged = 0
            if _solve3(jtj, grad, step):
                converged = 1
                for i in range(3):
                    if fabs(step[i]) > 1e-7 * _scale(i, p[0], p[1], p[2], rate_floor):
                        converged = 0
            break
        small = 1
        for i in range(3):
            if fabs(step[i]) > xtol * _scale(i, trial[0], trial[1], trial[2], rate_floor):
                small = 0
            p[i] = trial[i]
        gr, hr = hr, gr
        gi, hi = hi, gi
        cost = cost_new
        lam = fmax(lam / 3.0, 1e-12)
        if small or cost == 0.0:
            converged = 1
            break
    return p[0], p[1], p[2], cost, it, bool(converged)
