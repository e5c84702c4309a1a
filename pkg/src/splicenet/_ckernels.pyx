# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled counterparts of ``_pykernels``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def correlate3x3_valid(img, kernels):
    cdef double[:, ::1] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef double[:, :, ::1] k = np.ascontiguousarray(
        np.asarray(kernels, dtype=np.float64).reshape(-1, 3, 3))
    cdef Py_ssize_t n = k.shape[0], h = a.shape[0], w = a.shape[1]
    out_arr = np.empty((n, h - 2, w - 2), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t f, y, x, dy, dx
    cdef double s
    for f in range(n):
        for y in range(h - 2):
            for x in range(w - 2):
                s = 0.0
                for dy in range(3):
                    for dx in range(3):
                        s = s + k[f, dy, dx] * a[y + dy, x + dx]
                out[f, y, x] = s
    return out_arr


def lbp_codes(img):
    cdef double[:, ::1] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    out_arr = np.empty((h - 2, w - 2), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t y, x
    cdef double c
    cdef unsigned char code
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            c = a[y, x]
            code = 0
            if a[y - 1, x - 1] >= c: code |= 1
            if a[y - 1, x] >= c: code |= 2
            if a[y - 1, x + 1] >= c: code |= 4
            if a[y, x + 1] >= c: code |= 8
            if a[y + 1, x + 1] >= c: code |= 16
            if a[y + 1, x] >= c: code |= 32
            if a[y + 1, x - 1] >= c: code |= 64
            if a[y, x - 1] >= c: code |= 128
            out[y - 1, x - 1] = code
    return out_arr


def row_moments(x):
    cdef double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t r = a.shape[0], n = a.shape[1], i, j
    out_arr = np.empty((r, 5), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double s, sa, d, d2, s2, s3, s4
    for i in range(r):
        s = 0.0
        sa = 0.0
        for j in range(n):
            s += a[i, j]
            sa += a[i, j] if a[i, j] >= 0 else -a[i, j]
        s /= n
        s2 = 0.0
        s3 = 0.0
        s4 = 0.0
        for j in range(n):
            d = a[i, j] - s
            d2 = d * d
            s2 += d2
            s3 += d2 * d
            s4 += d2 * d2
        out[i, 0] = s
        out[i, 1] = sa / n
        out[i, 2] = s2 / n
        out[i, 3] = s3 / n
        out[i, 4] = s4 / n
    return out_arr
