# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels for the evaluation metrics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

cdef double EPS = np.finfo(np.float64).eps


cdef inline Py_ssize_t _count_below(const double[::1] thr, double v) noexcept nogil:
    # number of thresholds strictly below v (thr ascending)
    cdef Py_ssize_t lo = 0, hi = thr.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if thr[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def threshold_counts(const double[:, ::1] s, const cnp.uint8_t[:, ::1] gt, const double[::1] thresholds):
    """(tp, fp) per ascending threshold, a pixel being positive when s > threshold."""
    cdef Py_ssize_t n = thresholds.shape[0]
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1], i, j, k
    cdef cnp.int64_t[::1] fg_hist = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] bg_hist = np.zeros(n + 1, dtype=np.int64)
    with nogil:
        for i in range(h):
            for j in range(w):
                k = _count_below(thresholds, s[i, j])
                if gt[i, j]:
                    fg_hist[k] += 1
                else:
                    bg_hist[k] += 1
    tp = np.empty(n, dtype=np.int64)
    fp = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] tpv = tp, fpv = fp
    cdef cnp.int64_t acc_t = 0, acc_f = 0
    # positives at threshold k are the pixels whose count exceeds k
    for k in range(n - 1, -1, -1):
        acc_t += fg_hist[k + 1]
        acc_f += bg_hist[k + 1]
        tpv[k] = acc_t
        fpv[k] = acc_f
    return tp, fp


def abs_error_sum(const double[:, ::1] s, const double[:, ::1] gt):
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    with nogil:
        for i in range(s.shape[0]):
            for j in range(s.shape[1]):
                acc += fabs(s[i, j] - gt[i, j])
    return acc


def masked_mean_std(const double[:, ::1] x, const cnp.uint8_t[:, ::1] mask):
    """Mean and sample standard deviation (ddof=1) of x where mask is set."""
    cdef Py_ssize_t i, j, n = 0
    cdef double mean = 0.0, m2 = 0.0, delta
    with nogil:
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                if mask[i, j]:
                    n += 1
                    delta = x[i, j] - mean
                    mean += delta / n
                    m2 += delta * (x[i, j] - mean)
    if n == 0:
        return 0.0, 0.0, 0
    if n == 1:
        return mean, 0.0, 1
    return mean, sqrt(m2 / (n - 1)), n


def block_ssim(const double[:, ::1] pred, const double[:, ::1] gt,
               Py_ssize_t r0, Py_ssize_t r1, Py_ssize_t c0, Py_ssize_t c1):
    """Structural similarity of one rectangular block, as used by the region term."""
    cdef Py_ssize_t i, j
    cdef double n = (r1 - r0) * (c1 - c0)
    cdef double sx = 0.0, sy = 0.0, x, y, vx = 0.0, vy = 0.0, cxy = 0.0, dx, dy
    cdef double alpha, beta
    if n <= 0:
        return 0.0
    with nogil:
        for i in range(r0, r1):
            for j in range(c0, c1):
                sx += pred[i, j]
                sy += gt[i, j]
        x = sx / n
        y = sy / n
        for i in range(r0, r1):
            for j in range(c0, c1):
                dx = pred[i, j] - x
                dy = gt[i, j] - y
                vx += dx * dx
                vy += dy * dy
                cxy += dx * dy
    vx /= (n - 1 + EPS)
    vy /= (n - 1 + EPS)
    cxy /= (n - 1 + EPS)
    alpha = 4 * x * y * cxy
    beta = (x * x + y * y) * (vx + vy)
    if alpha != 0:
        return alpha / (beta + EPS)
    if beta == 0:
        return 1.0
    return 0.0
