# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY, M_PI

cnp.import_array()


def nearest_symbol(const double[::1] re, const double[::1] im,
                   const double[::1] cre, const double[::1] cim):
    cdef Py_ssize_t n = re.shape[0], m = cre.shape[0], i, k, best
    cdef double d, bd, dx, dy
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for i in range(n):
        best = 0
        dx = re[i] - cre[0]
        dy = im[i] - cim[0]
        bd = dx * dx + dy * dy
        for k in range(1, m):
            dx = re[i] - cre[k]
            dy = im[i] - cim[k]
            d = dx * dx + dy * dy
            if d < bd:
                bd = d
                best = k
        o[i] = best
    return out


def gumbel_argmax(const double[:, ::1] logq, const double[:, ::1] tau):
    cdef Py_ssize_t n = logq.shape[0], c = logq.shape[1], i, k, best
    cdef double v, bv
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for i in range(n):
        best = 0
        bv = logq[i, 0] + tau[i, 0]
        for k in range(1, c):
            v = logq[i, k] + tau[i, k]
            if v > bv:
                bv = v
                best = k
        o[i] = best
    return out


def relaxed_softmax(const double[:, ::1] logq, const double[:, ::1] tau, double rho):
    cdef Py_ssize_t n = logq.shape[0], c = logq.shape[1], i, k
    cdef double mx, s, y
    out = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        mx = -INFINITY
        for k in range(c):
            y = (logq[i, k] + tau[i, k]) / rho
            o[i, k] = y
            if y > mx:
                mx = y
        s = 0.0
        for k in range(c):
            o[i, k] = exp(o[i, k] - mx)
            s += o[i, k]
        for k in range(c):
            o[i, k] /= s
    return out


def gaussian_log_evidence(const double[:, ::1] zr, const double[:, ::1] zi,
                          const double[:, ::1] sr, const double[:, ::1] si,
                          const double[:, ::1] logw, double sigma2):
    cdef Py_ssize_t D = zr.shape[0], n = zr.shape[1], S = sr.shape[0], J = logw.shape[0]
    cdef Py_ssize_t d, j, s, i
    cdef double acc, dx, dy, mx, tot, a
    cdef double norm = n * log(M_PI * sigma2)
    ll = np.empty(S, dtype=np.float64)
    cdef double[::1] l = ll
    out = np.empty((D, J), dtype=np.float64)
    cdef double[:, ::1] o = out
    for d in range(D):
        for s in range(S):
            acc = 0.0
            for i in range(n):
                dx = zr[d, i] - sr[s, i]
                dy = zi[d, i] - si[s, i]
                acc += dx * dx + dy * dy
            l[s] = -acc / sigma2 - norm
        for j in range(J):
            mx = -INFINITY
            for s in range(S):
                a = l[s] + logw[j, s]
                if a > mx:
                    mx = a
            if mx == -INFINITY:
                o[d, j] = -INFINITY
                continue
            tot = 0.0
            for s in range(S):
                tot += exp(l[s] + logw[j, s] - mx)
            o[d, j] = mx + log(tot)
    return out
