# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-wise kernels; semantics mirror ``_kernels_np`` exactly.

Same contract as the fallback: 2-D C-contiguous inputs with the reduced
axis last, float32 or float64 throughout one call, ``adam_update``
mutates its buffers in place.  Results agree with the NumPy backend to
rounding, not bit for bit.
"""

import numpy as np

from libc.math cimport exp, sqrt, tanh

BACKEND_NAME = "cython"

ctypedef fused real:
    float
    double

cdef double _GELU_C = 0.7978845608028654  # sqrt(2/pi)
cdef double _GELU_A = 0.044715


def _check_2d(arr):
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got {arr.ndim}-D")


# -- softmax -------------------------------------------------------------

cdef void _softmax_rows(real[:, ::1] x, real[:, ::1] y) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    cdef double m, s, v
    for i in range(n):
        m = x[i, 0]
        for j in range(1, d):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(d):
            v = exp(<double> x[i, j] - m)
            y[i, j] = <real> v
            s += v
        for j in range(d):
            y[i, j] = <real> (y[i, j] / s)


def softmax_fwd(x):
    _check_2d(x)
    y = np.empty_like(x)
    if x.dtype == np.float32:
        _softmax_rows[float](x, y)
    else:
        _softmax_rows[double](x, y)
    return y


cdef void _softmax_bwd_rows(real[:, ::1] y, real[:, ::1] gy, real[:, ::1] gx) noexcept nogil:
    cdef Py_ssize_t n = y.shape[0], d = y.shape[1], i, j
    cdef double dot
    for i in range(n):
        dot = 0.0
        for j in range(d):
            dot += <double> y[i, j] * <double> gy[i, j]
        for j in range(d):
            gx[i, j] = <real> (<double> y[i, j] * (<double> gy[i, j] - dot))


def softmax_bwd(y, gy):
    _check_2d(y)
    gx = np.empty_like(y)
    if y.dtype == np.float32:
        _softmax_bwd_rows[float](y, gy, gx)
    else:
        _softmax_bwd_rows[double](y, gy, gx)
    return gx


# -- layer norm ----------------------------------------------------------

cdef void _ln_fwd(real[:, ::1] x, real[::1] gain, real[::1] bias, double eps,
                  real[:, ::1] y, real[::1] mean, real[::1] rstd) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    cdef double m, var, r, diff
    for i in range(n):
        m = 0.0
        for j in range(d):
            m += x[i, j]
        m /= d
        var = 0.0
        for j in range(d):
            diff = <double> x[i, j] - m
            var += diff * diff
        var /= d
        r = 1.0 / sqrt(var + eps)
        mean[i] = <real> m
        rstd[i] = <real> r
        for j in range(d):
            y[i, j] = <real> (((<double> x[i, j] - m) * r) * <double> gain[j] + <double> bias[j])


def layer_norm_fwd(x, gain, bias, eps):
    _check_2d(x)
    y = np.empty_like(x)
    mean = np.empty(x.shape[0], dtype=x.dtype)
    rstd = np.empty(x.shape[0], dtype=x.dtype)
    if x.dtype == np.float32:
        _ln_fwd[float](x, gain, bias, eps, y, mean, rstd)
    else:
        _ln_fwd[double](x, gain, bias, eps, y, mean, rstd)
    return y, mean, rstd


cdef void _ln_bwd(real[:, ::1] x, real[::1] gain, real[::1] mean, real[::1] rstd,
                  real[:, ::1] gy, real[:, ::1] gx, real[::1] ggain, real[::1] gbias) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], i, j
    cdef double m, r, xhat, gxh, s1, s2
    for j in range(d):
        ggain[j] = 0
        gbias[j] = 0
    for i in range(n):
        m = mean[i]
        r = rstd[i]
        s1 = 0.0
        s2 = 0.0
        for j in range(d):
            xhat = (<double> x[i, j] - m) * r
            gxh = <double> gy[i, j] * <double> gain[j]
            s1 += gxh
            s2 += gxh * xhat
            ggain[j] += <real> (<double> gy[i, j] * xhat)
            gbias[j] += gy[i, j]
        s1 /= d
        s2 /= d
        for j in range(d):
            xhat = (<double> x[i, j] - m) * r
            gxh = <double> gy[i, j] * <double> gain[j]
            gx[i, j] = <real> (r * (gxh - s1 - xhat * s2))


def layer_norm_bwd(x, gain, mean, rstd, gy):
    _check_2d(x)
    gx = np.empty_like(x)
    ggain = np.zeros(x.shape[1], dtype=x.dtype)
    gbias = np.zeros(x.shape[1], dtype=x.dtype)
    if x.dtype == np.float32:
        _ln_bwd[float](x, gain, mean, rstd, gy, gx, ggain, gbias)
    else:
        _ln_bwd[double](x, gain, mean, rstd, gy, gx, ggain, gbias)
    return gx, ggain, gbias


# -- GELU ------------------------------------------------------------------

cdef void _gelu_fwd(real[::1] x, real[::1] y) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v, inner
    for i in range(n):
        v = x[i]
        inner = _GELU_C * (v + _GELU_A * v * v * v)
        y[i] = <real> (0.5 * v * (1.0 + tanh(inner)))


def gelu_fwd(x):
    flat = x.reshape(-1)
    y = np.empty_like(flat)
    if x.dtype == np.float32:
        _gelu_fwd[float](flat, y)
    else:
        _gelu_fwd[double](flat, y)
    return y.reshape(x.shape)


cdef void _gelu_bwd(real[::1] x, real[::1] gy, real[::1] gx) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], i
    cdef double v, inner, t, sech2, dinner
    for i in range(n):
        v = x[i]
        inner = _GELU_C * (v + _GELU_A * v * v * v)
        t = tanh(inner)
        sech2 = 1.0 - t * t
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * v * v)
        gx[i] = <real> (<double> gy[i] * (0.5 * (1.0 + t) + 0.5 * v * sech2 * dinner))


def gelu_bwd(x, gy):
    flat = x.reshape(-1)
    gflat = gy.reshape(-1)
    gx = np.empty_like(flat)
    if x.dtype == np.float32:
        _gelu_bwd[float](flat, gflat, gx)
    else:
        _gelu_bwd[double](flat, gflat, gx)
    return gx.reshape(x.shape)


# -- Adam ---------------------------------------------------------------------

cdef void _adam(real[::1] p, real[::1] g, real[::1] m, real[::1] v,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2) noexcept nogil:
    cdef Py_ssize_t n = p.shape[0], i
    cdef double mi, vi
    for i in range(n):
        mi = beta1 * <double> m[i] + (1.0 - beta1) * <double> g[i]
        vi = beta2 * <double> v[i] + (1.0 - beta2) * <double> g[i] * <double> g[i]
        m[i] = <real> mi
        v[i] = <real> vi
        p[i] = <real> (<double> p[i] - lr * (mi / bc1) / (sqrt(vi / bc2) + eps))


def adam_update(p, g, m, v, step, lr, beta1, beta2, eps):
    if step < 1:
        raise ValueError("adam step counter starts at 1")
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    pf = p.reshape(-1)
    gf = g.reshape(-1)
    mf = m.reshape(-1)
    vf = v.reshape(-1)
    if p.dtype == np.float32:
        _adam[float](pf, gf, mf, vf, lr, beta1, beta2, eps, bc1, bc2)
    else:
        _adam[double](pf, gf, mf, vf, lr, beta1, beta2, eps, bc1, bc2)
