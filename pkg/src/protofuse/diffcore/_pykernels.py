"""Pure-numpy kernels. Same signatures and semantics as ``_ckernels``.

All functions take C-contiguous 2-D arrays and reduce over the last axis.
"""

import numpy as np


def softmax_fwd(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_bwd(y, gy):
    dot = (gy * y).sum(axis=1, keepdims=True)
    return y * (gy - dot)


def layer_norm_fwd(x, gain, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    return xhat * gain + bias, xhat, rstd[:, 0]


def layer_norm_bwd(gy, xhat, rstd, gain):
    ggain = (gy * xhat).sum(axis=0)
    gbias = gy.sum(axis=0)
    gxhat = gy * gain
    n = xhat.shape[1]
    a = gxhat.sum(axis=1, keepdims=True) / n
    b = (gxhat * xhat).sum(axis=1, keepdims=True) / n
    gx = rstd[:, None] * (gxhat - a - xhat * b)
    return gx, ggain, gbias
