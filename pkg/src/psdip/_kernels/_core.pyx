# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution kernels: true convolution, symmetric mirror padding.

Single-threaded by design so outputs are bit-reproducible run to run. The
mirror boundary is applied through index reflection (one fold), which also
makes the adjoints plain scatter-adds with the same reflected indices.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


cdef inline Py_ssize_t _reflect(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return -i - 1
    if i >= n:
        return 2 * n - 1 - i
    return i


def conv_bank(real[:, :, ::1] x, real[:, :, ::1] kernels):
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], s = x.shape[2]
    cdef Py_ssize_t nk = kernels.shape[0], n = kernels.shape[1]
    cdef Py_ssize_t pad = (n - 1) // 2
    out_arr = np.zeros((h, w, s), dtype=np.asarray(x).dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, u, v, b, ri, cj
    cdef real kv
    with nogil:
        for i in range(h):
            for j in range(w):
                for u in range(n):
                    ri = _reflect(i + u - pad, h)
                    for v in range(n):
                        cj = _reflect(j + v - pad, w)
                        if nk == 1:
                            kv = kernels[0, n - 1 - u, n - 1 - v]
                            for b in range(s):
                                out[i, j, b] += x[ri, cj, b] * kv
                        else:
                            for b in range(s):
                                out[i, j, b] += x[ri, cj, b] * kernels[b, n - 1 - u, n - 1 - v]
    return out_arr


def conv_bank_adjoint(real[:, :, ::1] g, real[:, :, ::1] kernels):
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1], s = g.shape[2]
    cdef Py_ssize_t nk = kernels.shape[0], n = kernels.shape[1]
    cdef Py_ssize_t pad = (n - 1) // 2
    out_arr = np.zeros((h, w, s), dtype=np.asarray(g).dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, u, v, b, ri, cj
    cdef real kv
    with nogil:
        for i in range(h):
            for j in range(w):
                for u in range(n):
                    ri = _reflect(i + u - pad, h)
                    for v in range(n):
                        cj = _reflect(j + v - pad, w)
                        if nk == 1:
                            kv = kernels[0, n - 1 - u, n - 1 - v]
                            for b in range(s):
                                out[ri, cj, b] += g[i, j, b] * kv
                        else:
                            for b in range(s):
                                out[ri, cj, b] += g[i, j, b] * kernels[b, n - 1 - u, n - 1 - v]
    return out_arr


def conv_mix(real[:, :, ::1] x, real[:, :, :, ::1] w, real[::1] b):
    cdef Py_ssize_t h = x.shape[0], wid = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], cout = w.shape[3]
    cdef Py_ssize_t pad = (k - 1) // 2
    out_arr = np.empty((h, wid, cout), dtype=np.asarray(x).dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, u, v, ci, co, ri, cj
    cdef real xv
    with nogil:
        for i in range(h):
            for j in range(wid):
                for co in range(cout):
                    out[i, j, co] = b[co]
                for u in range(k):
                    ri = _reflect(i + u - pad, h)
                    for v in range(k):
                        cj = _reflect(j + v - pad, wid)
                        for ci in range(cin):
                            xv = x[ri, cj, ci]
                            for co in range(cout):
                                out[i, j, co] += xv * w[k - 1 - u, k - 1 - v, ci, co]
    return out_arr


def conv_mix_grads(real[:, :, ::1] x, real[:, :, :, ::1] w, real[:, :, ::1] g,
                   bint need_x=True, bint need_w=True):
    cdef Py_ssize_t h = x.shape[0], wid = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], cout = w.shape[3]
    cdef Py_ssize_t pad = (k - 1) // 2
    dtype = np.asarray(x).dtype

    gb_arr = np.zeros(cout, dtype=dtype)
    gx_arr = np.zeros((h, wid, cin), dtype=dtype) if need_x else None
    gw_arr = np.zeros((k, k, cin, cout), dtype=dtype) if need_w else None

    cdef real[::1] gb = gb_arr
    cdef real[:, :, ::1] gx = gx_arr if need_x else x[:0]
    cdef real[:, :, :, ::1] gw = gw_arr if need_w else w[:0]

    cdef Py_ssize_t i, j, u, v, ci, co, ri, cj
    cdef real xv, acc, gv
    with nogil:
        for i in range(h):
            for j in range(wid):
                for co in range(cout):
                    gb[co] += g[i, j, co]
                for u in range(k):
                    ri = _reflect(i + u - pad, h)
                    for v in range(k):
                        cj = _reflect(j + v - pad, wid)
                        for ci in range(cin):
                            if need_w:
                                xv = x[ri, cj, ci]
                                for co in range(cout):
                                    gw[k - 1 - u, k - 1 - v, ci, co] += xv * g[i, j, co]
                            if need_x:
                                acc = 0
                                for co in range(cout):
                                    acc += g[i, j, co] * w[k - 1 - u, k - 1 - v, ci, co]
                                gx[ri, cj, ci] += acc
    return gx_arr, gw_arr, gb_arr
