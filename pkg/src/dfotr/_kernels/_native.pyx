# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: quadratic model evaluation and the TCG inner loop.

Mirrors the semantics of ``_pure``; contracts are exercised against both
backends by the test suite, and benchmarks/kernel_benchmark.py compares
their speed.
"""

from libc.math cimport sqrt, isfinite

import numpy as np

BACKEND = "native"


def quad_value_grad(double c, double[::1] g, H, double[::1] d):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t i, j
    cdef double value = c
    cdef double acc
    grad = np.empty(n)
    cdef double[::1] grad_v = grad
    cdef double[:, ::1] h_v
    if H is None:
        for i in range(n):
            value += g[i] * d[i]
            grad_v[i] = g[i]
        return value, grad
    h_v = H
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += h_v[i, j] * d[j]
        grad_v[i] = g[i] + acc
        value += g[i] * d[i] + 0.5 * d[i] * acc
    return value, grad


cdef double _boundary_tau(double dd, double dp, double pp, double delta):
    cdef double disc = dp * dp + pp * (delta * delta - dd)
    if disc < 0.0:
        disc = 0.0
    if pp <= 0.0:
        return 0.0
    return (-dp + sqrt(disc)) / pp


def steihaug(double[::1] g, double[:, ::1] H, double delta,
             double tol_rel=1e-2, int maxiter=0):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t i, j, it
    if maxiter <= 0:
        maxiter = <int> n
    d_arr = np.zeros(n)
    cdef double[::1] d = d_arr
    cdef double gnorm0 = 0.0
    for i in range(n):
        gnorm0 += g[i] * g[i]
    gnorm0 = sqrt(gnorm0)
    if gnorm0 == 0.0 or not isfinite(gnorm0):
        return d_arr, False

    r_arr = np.empty(n)
    p_arr = np.empty(n)
    hp_arr = np.empty(n)
    cdef double[::1] r = r_arr
    cdef double[::1] p = p_arr
    cdef double[::1] hp = hp_arr
    cdef double rr = 0.0
    for i in range(n):
        r[i] = g[i]
        p[i] = -g[i]
    rr = gnorm0 * gnorm0

    cdef double curv, pp, dp, dd, alpha, tau, dd_next, rr_next, acc
    for it in range(maxiter):
        curv = 0.0
        pp = 0.0
        dp = 0.0
        dd = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += H[i, j] * p[j]
            hp[i] = acc
            curv += p[i] * acc
            pp += p[i] * p[i]
            dp += d[i] * p[i]
            dd += d[i] * d[i]
        if curv <= 0.0 or curv <= 1e-15 * pp:
            tau = _boundary_tau(dd, dp, pp, delta)
            for i in range(n):
                d[i] += tau * p[i]
            return d_arr, True
        alpha = rr / curv
        dd_next = dd + 2.0 * alpha * dp + alpha * alpha * pp
        if dd_next >= delta * delta:
            tau = _boundary_tau(dd, dp, pp, delta)
            for i in range(n):
                d[i] += tau * p[i]
            return d_arr, True
        rr_next = 0.0
        for i in range(n):
            d[i] += alpha * p[i]
            r[i] += alpha * hp[i]
            rr_next += r[i] * r[i]
        if sqrt(rr_next) <= tol_rel * gnorm0:
            return d_arr, False
        for i in range(n):
            p[i] = -r[i] + (rr_next / rr) * p[i]
        rr = rr_next
    return d_arr, False
