"""Backend selection for the row-wise hot kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation. Set ``PROTOFUSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("PROTOFUSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        _impl = _ckernels
        BACKEND = "cython"


def use_backend(name: str) -> None:
    """Switch backend at runtime (benchmarks and parity tests)."""
    global _impl, BACKEND
    if name == "python":
        _impl = _pykernels
    elif name == "cython":
        from . import _ckernels

        _impl = _ckernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = name


def _rows(x):
    return np.ascontiguousarray(x.reshape(-1, x.shape[-1]))


def softmax_lastdim(x):
    return _impl.softmax_fwd(_rows(x)).reshape(x.shape)


def softmax_lastdim_backward(y, gy):
    return _impl.softmax_bwd(_rows(y), _rows(gy.astype(y.dtype, copy=False))).reshape(y.shape)


def layer_norm_lastdim(x, gain, bias, eps):
    """Returns (y, xhat, rstd) with xhat/rstd kept for the backward pass."""
    y, xhat, rstd = _impl.layer_norm_fwd(
        _rows(x),
        np.ascontiguousarray(gain, dtype=x.dtype),
        np.ascontiguousarray(bias, dtype=x.dtype),
        float(eps),
    )
    return y.reshape(x.shape), xhat, rstd


def layer_norm_lastdim_backward(gy, xhat, rstd, gain):
    """Returns (gx, ggain, gbias); gx has the flattened row layout of xhat."""
    return _impl.layer_norm_bwd(
        _rows(gy.astype(xhat.dtype, copy=False)),
        xhat,
        rstd,
        np.ascontiguousarray(gain, dtype=xhat.dtype),
    )
