"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, backward

# Gradients smaller than this are compared absolutely; 64-bit central
# differences carry ~1e-11 of cancellation noise at h=1e-5.
REL_FLOOR = 1e-5


def relative_error(analytic, numeric, floor=REL_FLOOR):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    checked: int
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.max_rel_err) and self.max_rel_err < self.tol)


def numeric_grad(fn, tensor: Tensor, indices, h=1e-5):
    """d fn() / d tensor[idx] for each flat idx by central differences."""
    flat = tensor.data.reshape(-1)
    out = np.empty(len(indices))
    for n, idx in enumerate(indices):
        orig = flat[idx]
        flat[idx] = orig + h
        fp = float(fn().data)
        flat[idx] = orig - h
        fm = float(fn().data)
        flat[idx] = orig
        out[n] = (fp - fm) / (2 * h)
    return out


def check_gradients(fn, tensors, name="fn", h=1e-5, tol=1e-4, indices=None, zero_grad=None):
    """Compare analytic gradients of the scalar ``fn()`` w.r.t. ``tensors``
    against central differences.

    ``indices`` optionally maps tensor position -> flat indices to probe;
    by default every element is probed.
    """
    for t in tensors:
        t.grad = None
    if zero_grad is not None:
        zero_grad()
    loss = fn()
    backward(loss)
    worst = 0.0
    count = 0
    for i, t in enumerate(tensors):
        idx = list(range(t.size)) if indices is None else list(indices.get(i, []))
        if not idx:
            continue
        grad = np.zeros(t.size) if t.grad is None else t.grad.reshape(-1)
        analytic = grad[idx]
        numeric = numeric_grad(fn, t, idx, h)
        err = relative_error(analytic, numeric)
        worst = max(worst, float(err.max()))
        count += len(idx)
    return GradCheckResult(name, worst, count, tol)
