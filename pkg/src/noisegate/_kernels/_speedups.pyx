# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Levenshtein DP and sliding median."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def levenshtein(str a, str b):
    """Minimum single-character edits (insert/delete/substitute) turning a into b."""
    if a == b:
        return 0
    # ord-by-ord copy handles every str, lone surrogates included
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ca = np.fromiter(
        map(ord, a), dtype=np.int32, count=len(a))
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cb = np.fromiter(
        map(ord, b), dtype=np.int32, count=len(b))
    cdef Py_ssize_t m = ca.shape[0]
    cdef Py_ssize_t n = cb.shape[0]
    if m == 0:
        return n
    if n == 0:
        return m
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev = np.arange(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur = np.empty(n + 1, dtype=np.int64)
    cdef Py_ssize_t i, j
    cdef long long sub, best
    for i in range(1, m + 1):
        cur[0] = i
        for j in range(1, n + 1):
            sub = prev[j - 1] + (ca[i - 1] != cb[j - 1])
            best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            if sub < best:
                best = sub
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[n])


cdef cnp.int16_t _median_of(cnp.int16_t* buf, Py_ssize_t length) noexcept nogil:
    # insertion sort; windows are small
    cdef Py_ssize_t i, j
    cdef cnp.int16_t key
    for i in range(1, length):
        key = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > key:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = key
    return buf[length // 2]


def sliding_median(values, int window):
    """Median filter with symmetric shrinking windows at the edges."""
    cdef cnp.ndarray[cnp.int16_t, ndim=1] x = np.ascontiguousarray(values, dtype=np.int16)
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.int16_t, ndim=1] out = np.empty(n, dtype=np.int16)
    cdef cnp.ndarray[cnp.int16_t, ndim=1] buf = np.empty(window, dtype=np.int16)
    cdef Py_ssize_t i, k, t, half = window // 2
    with nogil:
        for i in range(n):
            k = half
            if i < k:
                k = i
            if n - 1 - i < k:
                k = n - 1 - i
            for t in range(2 * k + 1):
                buf[t] = x[i - k + t]
            out[i] = _median_of(&buf[0], 2 * k + 1)
    return out
