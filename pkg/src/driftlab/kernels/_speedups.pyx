# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the two-layer model.

Signature-compatible with `driftlab.kernels.pure`; same algorithms
(max-shifted softmax, mean cross-entropy gradient).  Operates on
C-contiguous float64 arrays.
"""

from libc.math cimport exp, tanh

import numpy as np


def forward_one(const double[:, ::1] w1, const double[::1] b1,
                const double[:, ::1] w2, const double[::1] b2,
                const double[::1] x):
    cdef Py_ssize_t h = w1.shape[0]
    cdef Py_ssize_t d = w1.shape[1]
    cdef Py_ssize_t k = w2.shape[0]
    emb_arr = np.empty(h, dtype=np.float64)
    probs_arr = np.empty(k, dtype=np.float64)
    cdef double[::1] emb = emb_arr
    cdef double[::1] probs = probs_arr
    cdef Py_ssize_t i, j
    cdef double acc, m, s

    for i in range(h):
        acc = b1[i]
        for j in range(d):
            acc += w1[i, j] * x[j]
        emb[i] = tanh(acc)

    m = -1.7976931348623157e308
    for i in range(k):
        acc = b2[i]
        for j in range(h):
            acc += w2[i, j] * emb[j]
        probs[i] = acc
        if acc > m:
            m = acc
    s = 0.0
    for i in range(k):
        probs[i] = exp(probs[i] - m)
        s += probs[i]
    for i in range(k):
        probs[i] /= s
    return emb_arr, probs_arr


def forward_batch(const double[:, ::1] w1, const double[::1] b1,
                  const double[:, ::1] w2, const double[::1] b2,
                  const double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t h = w1.shape[0]
    cdef Py_ssize_t d = w1.shape[1]
    cdef Py_ssize_t k = w2.shape[0]
    emb_arr = np.empty((n, h), dtype=np.float64)
    probs_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] emb = emb_arr
    cdef double[:, ::1] probs = probs_arr
    cdef Py_ssize_t r, i, j
    cdef double acc, m, s

    for r in range(n):
        for i in range(h):
            acc = b1[i]
            for j in range(d):
                acc += w1[i, j] * x[r, j]
            emb[r, i] = tanh(acc)
        m = -1.7976931348623157e308
        for i in range(k):
            acc = b2[i]
            for j in range(h):
                acc += w2[i, j] * emb[r, j]
            probs[r, i] = acc
            if acc > m:
                m = acc
        s = 0.0
        for i in range(k):
            probs[r, i] = exp(probs[r, i] - m)
            s += probs[r, i]
        for i in range(k):
            probs[r, i] /= s
    return emb_arr, probs_arr


def grad_batch(const double[:, ::1] w1, const double[::1] b1,
               const double[:, ::1] w2, const double[::1] b2,
               const double[:, ::1] x, const long[::1] y):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t h = w1.shape[0]
    cdef Py_ssize_t d = w1.shape[1]
    cdef Py_ssize_t k = w2.shape[0]
    emb_arr, probs_arr = forward_batch(w1, b1, w2, b2, x)
    cdef double[:, ::1] emb = emb_arr
    cdef double[:, ::1] dlogits = probs_arr
    gw1_arr = np.zeros((h, d), dtype=np.float64)
    gb1_arr = np.zeros(h, dtype=np.float64)
    gw2_arr = np.zeros((k, h), dtype=np.float64)
    gb2_arr = np.zeros(k, dtype=np.float64)
    cdef double[:, ::1] gw1 = gw1_arr
    cdef double[::1] gb1 = gb1_arr
    cdef double[:, ::1] gw2 = gw2_arr
    cdef double[::1] gb2 = gb2_arr
    cdef Py_ssize_t r, i, j
    cdef double g, dpre

    for r in range(n):
        dlogits[r, y[r]] -= 1.0
        for i in range(k):
            dlogits[r, i] /= n
    for r in range(n):
        for i in range(k):
            g = dlogits[r, i]
            gb2[i] += g
            for j in range(h):
                gw2[i, j] += g * emb[r, j]
        for j in range(h):
            g = 0.0
            for i in range(k):
                g += dlogits[r, i] * w2[i, j]
            dpre = g * (1.0 - emb[r, j] * emb[r, j])
            gb1[j] += dpre
            for i in range(d):
                gw1[j, i] += dpre * x[r, i]
    return gw1_arr, gb1_arr, gw2_arr, gb2_arr
