# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled linear-chain CRF kernels; same contract as ``_crf_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef inline double _lse_row(double[:] buf, Py_ssize_t K) noexcept nogil:
    cdef double mx = -INFINITY, acc = 0.0
    cdef Py_ssize_t i
    for i in range(K):
        if buf[i] > mx:
            mx = buf[i]
    for i in range(K):
        acc += exp(buf[i] - mx)
    return log(acc) + mx


def forward_backward(double[:, :, ::1] scores, cnp.int64_t[::1] lengths, double[:, ::1] trans,
                     double[::1] start, double[::1] end):
    cdef Py_ssize_t B = scores.shape[0], m = scores.shape[1], K = scores.shape[2]
    cdef Py_ssize_t b, t, i, j, n
    cdef double z, w
    log_z_arr = np.zeros(B)
    unary_arr = np.zeros((B, m, K))
    pair_arr = np.zeros((B, K, K))
    cdef double[::1] log_z = log_z_arr
    cdef double[:, :, ::1] unary = unary_arr
    cdef double[:, :, ::1] pair = pair_arr
    cdef double[:, ::1] alpha = np.empty((m, K))
    cdef double[:, ::1] beta = np.empty((m, K))
    cdef double[::1] buf = np.empty(K)
    with nogil:
        for b in range(B):
            n = lengths[b]
            if n == 0:
                continue
            for j in range(K):
                alpha[0, j] = start[j] + scores[b, 0, j]
            for t in range(1, n):
                for j in range(K):
                    for i in range(K):
                        buf[i] = alpha[t - 1, i] + trans[i, j]
                    alpha[t, j] = _lse_row(buf, K) + scores[b, t, j]
            for j in range(K):
                beta[n - 1, j] = end[j]
            for t in range(n - 2, -1, -1):
                for i in range(K):
                    for j in range(K):
                        buf[j] = trans[i, j] + scores[b, t + 1, j] + beta[t + 1, j]
                    beta[t, i] = _lse_row(buf, K)
            for j in range(K):
                buf[j] = alpha[n - 1, j] + end[j]
            z = _lse_row(buf, K)
            log_z[b] = z
            for t in range(n):
                for j in range(K):
                    unary[b, t, j] = exp(alpha[t, j] + beta[t, j] - z)
            for t in range(n - 1):
                for i in range(K):
                    w = alpha[t, i] - z
                    for j in range(K):
                        pair[b, i, j] += exp(w + trans[i, j] + scores[b, t + 1, j] + beta[t + 1, j])
    return log_z_arr, unary_arr, pair_arr


def viterbi(double[:, :, ::1] scores, cnp.int64_t[::1] lengths, double[:, ::1] trans,
            double[::1] start, double[::1] end):
    cdef Py_ssize_t B = scores.shape[0], m = scores.shape[1], K = scores.shape[2]
    cdef Py_ssize_t b, t, i, j, n, y
    cdef double v, mx
    paths_arr = np.zeros((B, m), dtype=np.int64)
    best_arr = np.zeros(B)
    cdef cnp.int64_t[:, ::1] paths = paths_arr
    cdef double[::1] best = best_arr
    cdef double[:, ::1] suffix = np.empty((m, K))
    with nogil:
        for b in range(B):
            n = lengths[b]
            if n == 0:
                continue
            for j in range(K):
                suffix[n - 1, j] = end[j] + scores[b, n - 1, j]
            for t in range(n - 2, -1, -1):
                for i in range(K):
                    mx = -INFINITY
                    for j in range(K):
                        v = trans[i, j] + suffix[t + 1, j]
                        if v > mx:
                            mx = v
                    suffix[t, i] = scores[b, t, i] + mx
            y = 0
            mx = -INFINITY
            for j in range(K):
                v = start[j] + suffix[0, j]
                if v > mx:
                    mx = v
                    y = j
            best[b] = mx
            paths[b, 0] = y
            for t in range(1, n):
                mx = -INFINITY
                i = y
                for j in range(K):
                    v = trans[i, j] + suffix[t, j]
                    if v > mx:
                        mx = v
                        y = j
                paths[b, t] = y
    return paths_arr, best_arr
