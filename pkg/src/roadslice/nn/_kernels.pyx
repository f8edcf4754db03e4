# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: fused LSTM gate math, conv patch ops, Adam updates.

Mirrors the signatures of ``roadslice.nn._kernels_np``.  These fuse the
pointwise chains that cost NumPy one dispatch and one temporary per
operation; the surrounding GEMMs stay in BLAS.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt, tanh
from libc.string cimport memcpy

cnp.import_array()


cdef inline double _sig(double x) nogil:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


def lstm_gates_forward(cnp.ndarray[double, ndim=2] pre,
                       cnp.ndarray[double, ndim=2] c_prev):
    cdef Py_ssize_t B = pre.shape[0]
    cdef Py_ssize_t G = pre.shape[1] // 4
    cdef cnp.ndarray[double, ndim=2] gates = np.empty_like(pre)
    cdef cnp.ndarray[double, ndim=2] c = np.empty((B, G), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] h = np.empty((B, G), dtype=np.float64)
    cdef double[:, ::1] pre_v = pre
    cdef double[:, ::1] cp_v = c_prev
    cdef double[:, ::1] g_v = gates
    cdef double[:, ::1] c_v = c
    cdef double[:, ::1] h_v = h
    cdef Py_ssize_t b, j
    cdef double gi, gf, gg, go, cj
    with nogil:
        for b in range(B):
            for j in range(G):
                gi = _sig(pre_v[b, j])
                gf = _sig(pre_v[b, G + j])
                gg = tanh(pre_v[b, 2 * G + j])
                go = _sig(pre_v[b, 3 * G + j])
                g_v[b, j] = gi
                g_v[b, G + j] = gf
                g_v[b, 2 * G + j] = gg
                g_v[b, 3 * G + j] = go
                cj = gf * cp_v[b, j] + gi * gg
                c_v[b, j] = cj
                h_v[b, j] = go * tanh(cj)
    return h, c, gates


def lstm_gates_backward(cnp.ndarray[double, ndim=2] gh,
                        cnp.ndarray[double, ndim=2] gc,
                        cnp.ndarray[double, ndim=2] gates,
                        cnp.ndarray[double, ndim=2] c_prev,
                        cnp.ndarray[double, ndim=2] c):
    cdef Py_ssize_t B = gh.shape[0]
    cdef Py_ssize_t G = gh.shape[1]
    cdef cnp.ndarray[double, ndim=2] gpre = np.empty((B, 4 * G), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] gcp = np.empty((B, G), dtype=np.float64)
    cdef double[:, ::1] gh_v = gh
    cdef double[:, ::1] gc_v = gc
    cdef double[:, ::1] g_v = gates
    cdef double[:, ::1] cp_v = c_prev
    cdef double[:, ::1] c_v = c
    cdef double[:, ::1] gpre_v = gpre
    cdef double[:, ::1] gcp_v = gcp
    cdef Py_ssize_t b, j
    cdef double gi, gf, gg, go, tc, dc
    with nogil:
        for b in range(B):
            for j in range(G):
                gi = g_v[b, j]
                gf = g_v[b, G + j]
                gg = g_v[b, 2 * G + j]
                go = g_v[b, 3 * G + j]
                tc = tanh(c_v[b, j])
                dc = gc_v[b, j] + gh_v[b, j] * go * (1.0 - tc * tc)
                gpre_v[b, j] = dc * gg * gi * (1.0 - gi)
                gpre_v[b, G + j] = dc * cp_v[b, j] * gf * (1.0 - gf)
                gpre_v[b, 2 * G + j] = dc * gi * (1.0 - gg * gg)
                gpre_v[b, 3 * G + j] = gh_v[b, j] * tc * go * (1.0 - go)
                gcp_v[b, j] = dc * gf
    return gpre, gcp


def im2col3d(cnp.ndarray[double, ndim=5] xp,
             Py_ssize_t kd, Py_ssize_t kh, Py_ssize_t kw):
    """Patches as (F, B, P), F = (channel, kd, kh, kw) feature order.

    Feature-major layout keeps the extraction streams contiguous and lets
    the convolution GEMMs run directly on (F, B*P) without transposes.
    """
    cdef Py_ssize_t B = xp.shape[0]
    cdef Py_ssize_t C = xp.shape[1]
    cdef Py_ssize_t D = xp.shape[2]
    cdef Py_ssize_t H = xp.shape[3]
    cdef Py_ssize_t W = xp.shape[4]
    cdef Py_ssize_t do = D - kd + 1
    cdef Py_ssize_t ho = H - kh + 1
    cdef Py_ssize_t wo = W - kw + 1
    cdef Py_ssize_t P = do * ho * wo
    cdef cnp.ndarray[double, ndim=3] col = np.empty(
        (C * kd * kh * kw, B, P), dtype=np.float64)
    cdef double[:, :, :, :, ::1] x_v = np.ascontiguousarray(xp)
    cdef double[:, :, ::1] col_v = col
    cdef double *xd = &x_v[0, 0, 0, 0, 0]
    cdef double *cd = &col_v[0, 0, 0]
    cdef Py_ssize_t sxb = C * D * H * W, sxc = D * H * W, sxd = H * W, sxh = W
    cdef Py_ssize_t b, d, h, c, a, e, f, q, src, dst
    with nogil:
        for c in range(C):
            for a in range(kd):
                for e in range(kh):
                    for f in range(kw):
                        q = ((c * kd + a) * kh + e) * kw + f
                        for b in range(B):
                            dst = (q * B + b) * P
                            for d in range(do):
                                for h in range(ho):
                                    src = (b * sxb + c * sxc
                                           + (d + a) * sxd + (h + e) * sxh + f)
                                    memcpy(cd + dst, xd + src,
                                           wo * sizeof(double))
                                    dst += wo
    return col


def col2im3d(cnp.ndarray[double, ndim=3] gcol,
             Py_ssize_t c, Py_ssize_t dp, Py_ssize_t hp, Py_ssize_t wp,
             Py_ssize_t kd, Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t B = gcol.shape[1]
    cdef Py_ssize_t do = dp - kd + 1
    cdef Py_ssize_t ho = hp - kh + 1
    cdef Py_ssize_t wo = wp - kw + 1
    cdef Py_ssize_t P = do * ho * wo
    cdef cnp.ndarray[double, ndim=5] out = np.zeros(
        (B, c, dp, hp, wp), dtype=np.float64)
    cdef double[:, :, ::1] g_v = np.ascontiguousarray(gcol)
    cdef double[:, :, :, :, ::1] out_v = out
    cdef double *gd = &g_v[0, 0, 0]
    cdef double *od = &out_v[0, 0, 0, 0, 0]
    cdef Py_ssize_t sob = c * dp * hp * wp, soc = dp * hp * wp, sod = hp * wp, soh = wp
    cdef Py_ssize_t b, d, h, w, cc, a, e, f, q, src, dst
    with nogil:
        for cc in range(c):
            for a in range(kd):
                for e in range(kh):
                    for f in range(kw):
                        q = ((cc * kd + a) * kh + e) * kw + f
                        for b in range(B):
                            src = (q * B + b) * P
                            for d in range(do):
                                for h in range(ho):
                                    dst = (b * sob + cc * soc
                                           + (d + a) * sod + (h + e) * soh + f)
                                    for w in range(wo):
                                        od[dst + w] += gd[src + w]
                                    src += wo
    return out


def adam_update(cnp.ndarray[double, ndim=1] param,
                cnp.ndarray[double, ndim=1] grad,
                cnp.ndarray[double, ndim=1] m,
                cnp.ndarray[double, ndim=1] v,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2):
    cdef Py_ssize_t n = param.shape[0]
    cdef double[::1] p_v = param
    cdef double[::1] g_v = grad
    cdef double[::1] m_v = m
    cdef double[::1] v_v = v
    cdef Py_ssize_t i
    cdef double g
    with nogil:
        for i in range(n):
            g = g_v[i]
            m_v[i] = beta1 * m_v[i] + (1.0 - beta1) * g
            v_v[i] = beta2 * v_v[i] + (1.0 - beta2) * g * g
            p_v[i] -= lr * (m_v[i] / bc1) / (sqrt(v_v[i] / bc2) + eps)
