# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline long _half_floor(long d) nogil:
    # floor(d / 2) for either sign; d - (d & 1) is even so C division is exact
    return (d - (d & 1)) / 2


cdef inline long _mod(long v, long m) nogil:
    cdef long r = v % m
    if r < 0:
        r += m
    return r


def lift_pass(cnp.int32_t[:, :] coeffs, cnp.uint8_t[:, :] active, int stride, int axis, bint inverse):
    cdef Py_ssize_t h = coeffs.shape[0], w = coeffs.shape[1]
    cdef Py_ssize_t a, b, step = 2 * stride
    cdef long e, o, d, xe
    if axis == 1:
        with nogil:
            a = 0
            while a < h:
                b = 0
                while b + stride < w:
                    if active[a, b] and active[a, b + stride]:
                        e = coeffs[a, b]
                        o = coeffs[a, b + stride]
                        if not inverse:
                            d = o - e
                            coeffs[a, b] = e + _half_floor(d)
                            coeffs[a, b + stride] = d
                        else:
                            xe = e - _half_floor(o)
                            coeffs[a, b] = xe
                            coeffs[a, b + stride] = o + xe
                    b += step
                a += stride
    else:
        with nogil:
            b = 0
            while b < w:
                a = 0
                while a + stride < h:
                    if active[a, b] and active[a + stride, b]:
                        e = coeffs[a, b]
                        o = coeffs[a + stride, b]
                        if not inverse:
                            d = o - e
                            coeffs[a, b] = e + _half_floor(d)
                            coeffs[a + stride, b] = d
                        else:
                            xe = e - _half_floor(o)
                            coeffs[a, b] = xe
                            coeffs[a + stride, b] = o + xe
                    a += step
                b += stride


def steer_block(values, int w, double[:, :] table, long vmin, cls, energy,
                double lam, long modulus, long target, int max_delta):
    cdef cnp.int64_t[:] v = np.ascontiguousarray(values, dtype=np.int64)
    cdef cnp.int64_t[:] c = np.ascontiguousarray(cls, dtype=np.int64)
    cdef double[:] en = np.ascontiguousarray(energy, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i, bi = 0
    cdef Py_ssize_t ncols = table.shape[1]
    cdef long dd, d, best_d, idx, cur_i, total, new_l, old_l, gain, bd = 0
    cdef double s, best_s, cost, ratio, best_r
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] cur = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[:] o = out

    with nogil:
        for i in range(n):
            best_s = -INFINITY
            best_d = 0
            # visit 0, -1, +1, -2, +2, ... so ties keep the smallest move
            for dd in range(0, 2 * max_delta + 1):
                if dd == 0:
                    d = 0
                elif dd % 2 == 1:
                    d = -((dd + 1) / 2)
                else:
                    d = dd / 2
                idx = v[i] + d - vmin
                if idx < 0:
                    idx = 0
                elif idx >= ncols:
                    idx = ncols - 1
                s = w * table[c[i], idx] - lam * en[i] * (d * d)
                if s > best_s:
                    best_s = s
                    best_d = d
            cur[i] = best_d

        while True:
            total = 0
            for i in range(n):
                total += _mod(v[i] + cur[i], modulus)
            if w * (total - target) >= 0:
                break
            best_r = -INFINITY
            for i in range(n):
                old_l = _mod(v[i] + cur[i], modulus)
                for d in range(-max_delta, max_delta + 1):
                    new_l = _mod(v[i] + d, modulus)
                    gain = w * (new_l - old_l)
                    if gain <= 0:
                        continue
                    if en[i] == 0:
                        ratio = INFINITY
                    else:
                        cost = en[i] * (d * d - cur[i] * cur[i])
                        if cost < 1e-9:
                            cost = 1e-9
                        ratio = gain / cost
                    if ratio > best_r:
                        best_r = ratio
                        bi = i
                        bd = d
            if best_r == -INFINITY:
                break
            cur[bi] = bd

        for i in range(n):
            o[i] = v[i] + cur[i]
    return out


def block_lsb_sums(cnp.int32_t[:, :] coeffs, origins, int side, long modulus):
    cdef cnp.int64_t[:, :] org = np.ascontiguousarray(origins, dtype=np.int64).reshape(-1, 2)
    cdef Py_ssize_t k, i, j, nb = org.shape[0]
    out = np.empty(nb, dtype=np.int64)
    cdef cnp.int64_t[:] o = out
    cdef long acc, r0, c0
    with nogil:
        for k in range(nb):
            acc = 0
            r0 = org[k, 0]
            c0 = org[k, 1]
            for i in range(side):
                for j in range(side):
                    acc += _mod(coeffs[r0 + i, c0 + j], modulus)
            o[k] = acc
    return out
