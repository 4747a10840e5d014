# Compiled kernels for the hashed pair classifier. Mirrors _pyref.py step for
# step; anything changed there must change here too.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log
from libc.stdint cimport int64_t

cnp.import_array()


def fastpair_forward_batch(
    double[:, ::1] emb,
    double[:, ::1] head_w,
    double[::1] head_b,
    int64_t[::1] ids_flat,
    int64_t[::1] offsets,
):
    """Positive-class probability per example (see _pyref for the contract)."""
    cdef Py_ssize_t n = offsets.shape[0] - 1
    cdef Py_ssize_t dim = emb.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double[::1] h = np.empty(dim, dtype=np.float64)
    cdef Py_ssize_t i, j, d
    cdef int64_t lo, hi, row
    cdef double inv, z0, z1, m, e0, e1

    for i in range(n):
        lo = offsets[i]
        hi = offsets[i + 1]
        for d in range(dim):
            h[d] = 0.0
        for j in range(lo, hi):
            row = ids_flat[j]
            for d in range(dim):
                h[d] += emb[row, d]
        inv = 1.0 / (hi - lo)
        z0 = head_b[0]
        z1 = head_b[1]
        for d in range(dim):
            z0 += h[d] * inv * head_w[d, 0]
            z1 += h[d] * inv * head_w[d, 1]
        m = z0 if z0 > z1 else z1
        e0 = exp(z0 - m)
        e1 = exp(z1 - m)
        out_v[i] = e1 / (e0 + e1)
    return out


def fastpair_train_epoch(
    double[:, ::1] emb,
    double[:, ::1] head_w,
    double[::1] head_b,
    int64_t[::1] ids_flat,
    int64_t[::1] offsets,
    int64_t[::1] labels,
    int64_t[::1] order,
    double[::1] lrs,
):
    """One in-place SGD pass; returns the summed pre-update cross-entropy."""
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t dim = emb.shape[1]
    cdef double[::1] h = np.empty(dim, dtype=np.float64)
    cdef Py_ssize_t step, j, d
    cdef int64_t i, lo, hi, row, y
    cdef double lr, inv, z0, z1, m, e0, e1, tot, p0, p1
    cdef double dz0, dz1, dh_d, total = 0.0

    for step in range(n):
        i = order[step]
        lr = lrs[step]
        lo = offsets[i]
        hi = offsets[i + 1]
        for d in range(dim):
            h[d] = 0.0
        for j in range(lo, hi):
            row = ids_flat[j]
            for d in range(dim):
                h[d] += emb[row, d]
        inv = 1.0 / (hi - lo)
        for d in range(dim):
            h[d] *= inv
        z0 = head_b[0]
        z1 = head_b[1]
        for d in range(dim):
            z0 += h[d] * head_w[d, 0]
            z1 += h[d] * head_w[d, 1]
        m = z0 if z0 > z1 else z1
        e0 = exp(z0 - m)
        e1 = exp(z1 - m)
        tot = e0 + e1
        p0 = e0 / tot
        p1 = e1 / tot
        y = labels[i]
        total -= log(p1 if y == 1 else p0)
        dz0 = p0 - (1.0 if y == 0 else 0.0)
        dz1 = p1 - (1.0 if y == 1 else 0.0)
        head_b[0] -= lr * dz0
        head_b[1] -= lr * dz1
        for d in range(dim):
            # gradient w.r.t. h uses the pre-update head weights
            dh_d = head_w[d, 0] * dz0 + head_w[d, 1] * dz1
            head_w[d, 0] -= lr * h[d] * dz0
            head_w[d, 1] -= lr * h[d] * dz1
            h[d] = lr * inv * dh_d
        for j in range(lo, hi):
            row = ids_flat[j]
            for d in range(dim):
                emb[row, d] -= h[d]
    return total
