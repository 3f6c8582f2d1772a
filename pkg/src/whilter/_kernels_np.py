"""Pure NumPy implementations of the hot kernels.

Signature-compatible with the compiled extension ``whilter._kernels``;
``whilter.backend`` picks whichever is available at import time.  All
row-wise kernels expect C-contiguous 2-D arrays with the reduced axis
last, and every array argument of a call must share one dtype (float32
or float64).  ``adam_update`` mutates its first four arguments in place.
"""

import numpy as np

BACKEND_NAME = "numpy"

# tanh-form GELU constants
_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def softmax_fwd(x):
    m = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - m)
    s = np.sum(e, axis=-1, keepdims=True)
    return e / s


def softmax_bwd(y, gy):
    dot = np.sum(y * gy, axis=-1, keepdims=True)
    return y * (gy - dot)


def layer_norm_fwd(x, gain, bias, eps):
    mean = x.mean(axis=-1)
    var = x.var(axis=-1)
    rstd = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    xhat = (x - mean[:, None]) * rstd[:, None]
    return xhat * gain + bias, mean, rstd


def layer_norm_bwd(x, gain, mean, rstd, gy):
    xhat = (x - mean[:, None]) * rstd[:, None]
    gxhat = gy * gain
    m1 = gxhat.mean(axis=-1, keepdims=True)
    m2 = (gxhat * xhat).mean(axis=-1, keepdims=True)
    gx = rstd[:, None] * (gxhat - m1 - xhat * m2)
    ggain = (gy * xhat).sum(axis=0)
    gbias = gy.sum(axis=0)
    return gx, ggain, gbias


def gelu_fwd(x):
    c = np.asarray(_GELU_C, dtype=x.dtype)
    a = np.asarray(_GELU_A, dtype=x.dtype)
    t = np.tanh(c * (x + a * x * x * x))
    return 0.5 * x * (1.0 + t)


def gelu_bwd(x, gy):
    c = np.asarray(_GELU_C, dtype=x.dtype)
    a = np.asarray(_GELU_A, dtype=x.dtype)
    t = np.tanh(c * (x + a * x * x * x))
    du = c * (1.0 + 3.0 * a * x * x)
    dydx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
    return gy * dydx


def adam_update(p, g, m, v, step, lr, beta1, beta2, eps):
    if step < 1:
        raise ValueError("adam step counter starts at 1")
    dt = p.dtype
    b1 = np.asarray(beta1, dtype=dt)
    b2 = np.asarray(beta2, dtype=dt)
    one = np.asarray(1.0, dtype=dt)
    m *= b1
    m += (one - b1) * g
    v *= b2
    v += (one - b2) * g * g
    bc1 = np.asarray(1.0 - beta1**step, dtype=dt)
    bc2 = np.asarray(1.0 - beta2**step, dtype=dt)
    denom = np.sqrt(v / bc2) + np.asarray(eps, dtype=dt)
    p -= np.asarray(lr, dtype=dt) * (m / bc1) / denom
