# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-wise kernels for softmax and layer normalization.

Single pass per row, no temporaries. Mirrors ``_pykernels`` exactly in
contract; results agree with it to rounding.
"""

import numpy as np
from cython cimport floating
from libc.math cimport exp, sqrt


def softmax_fwd(const floating[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    cdef floating mx, s
    out = np.empty((n, m), dtype=np.float64 if floating is double else np.float32)
    cdef floating[:, ::1] y = out
    with nogil:
        for i in range(n):
            mx = x[i, 0]
            for j in range(1, m):
                if x[i, j] > mx:
                    mx = x[i, j]
            s = 0
            for j in range(m):
                y[i, j] = exp(x[i, j] - mx)
                s = s + y[i, j]
            for j in range(m):
                y[i, j] = y[i, j] / s
    return out


def softmax_bwd(const floating[:, ::1] y, const floating[:, ::1] gy):
    cdef Py_ssize_t n = y.shape[0], m = y.shape[1], i, j
    cdef floating dot
    out = np.empty((n, m), dtype=np.float64 if floating is double else np.float32)
    cdef floating[:, ::1] gx = out
    with nogil:
        for i in range(n):
            dot = 0
            for j in range(m):
                dot = dot + gy[i, j] * y[i, j]
            for j in range(m):
                gx[i, j] = y[i, j] * (gy[i, j] - dot)
    return out


def layer_norm_fwd(const floating[:, ::1] x, const floating[::1] gain,
                   const floating[::1] bias, double eps):
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    cdef floating mu, var, r, c
    dt = np.float64 if floating is double else np.float32
    out = np.empty((n, m), dtype=dt)
    xhat_arr = np.empty((n, m), dtype=dt)
    rstd_arr = np.empty(n, dtype=dt)
    cdef floating[:, ::1] y = out
    cdef floating[:, ::1] xhat = xhat_arr
    cdef floating[::1] rstd = rstd_arr
    with nogil:
        for i in range(n):
            mu = 0
            for j in range(m):
                mu = mu + x[i, j]
            mu = mu / m
            var = 0
            for j in range(m):
                c = x[i, j] - mu
                var = var + c * c
            var = var / m
            r = 1 / sqrt(var + eps)
            rstd[i] = r
            for j in range(m):
                c = (x[i, j] - mu) * r
                xhat[i, j] = c
                y[i, j] = c * gain[j] + bias[j]
    return out, xhat_arr, rstd_arr


def layer_norm_bwd(const floating[:, ::1] gy, const floating[:, ::1] xhat,
                   const floating[::1] rstd, const floating[::1] gain):
    cdef Py_ssize_t n = gy.shape[0], m = gy.shape[1], i, j
    cdef floating a, b, g
    dt = np.float64 if floating is double else np.float32
    gx_arr = np.empty((n, m), dtype=dt)
    ggain_arr = np.zeros(m, dtype=dt)
    gbias_arr = np.zeros(m, dtype=dt)
    cdef floating[:, ::1] gx = gx_arr
    cdef floating[::1] ggain = ggain_arr
    cdef floating[::1] gbias = gbias_arr
    with nogil:
        for i in range(n):
            a = 0
            b = 0
            for j in range(m):
                g = gy[i, j] * gain[j]
                a = a + g
                b = b + g * xhat[i, j]
                ggain[j] = ggain[j] + gy[i, j] * xhat[i, j]
                gbias[j] = gbias[j] + gy[i, j]
            a = a / m
            b = b / m
            for j in range(m):
                gx[i, j] = rstd[i] * (gy[i, j] * gain[j] - a - xhat[i, j] * b)
    return gx_arr, ggain_arr, gbias_arr
