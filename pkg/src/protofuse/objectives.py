"""Training objectives: regression MSE, per-slot auxiliary MSE and the
prototype diversity penalty, combined linearly."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import diffcore as dc
from .diffcore import Module, Tensor
from .errors import ContractError, DegeneratePrototypeError, SchemaError
from .layers import Linear

NORM_EPS = 1e-8


class AuxHead(Module):
    """Linear d -> 1 applied to every fused slot. ``per_slot`` gives each
    slot its own map instead of one shared map."""

    def __init__(self, d, K, rng, per_slot=False, dtype=np.float64):
        self.per_slot = per_slot
        if per_slot:
            self.heads = [Linear(d, 1, rng, dtype) for _ in range(K)]
        else:
            self.shared = Linear(d, 1, rng, dtype)

    def __call__(self, fused: Tensor) -> Tensor:
        """(B, K, d) -> (B, K) auxiliary predictions."""
        if self.per_slot:
            if fused.shape[-2] != len(self.heads):
                raise SchemaError(f"expected {len(self.heads)} slots, got {fused.shape[-2]}")
            cols = [head(fused[..., k, :]) for k, head in enumerate(self.heads)]
            return dc.concat(cols, axis=-1)
        out = self.shared(fused)
        return out.reshape(out.shape[:-1])


@dataclass
class LossBreakdown:
    l_reg: float
    l_aux: float
    l_div: float
    total: float
    lambda_aux: float
    lambda_div: float

    def to_dict(self) -> dict:
        return asdict(self)


def reg_loss(pred: Tensor, y) -> Tensor:
    y = np.asarray(y)
    if pred.shape[0] == 0:
        raise ContractError("regression loss on an empty batch")
    if pred.shape != y.shape:
        raise ContractError(f"prediction shape {pred.shape} != label shape {y.shape}")
    return dc.square(pred - y).mean()


def aux_loss(fused: Tensor, head: AuxHead, y) -> Tensor:
    """Mean over slots and batch of (aux_k - y)^2."""
    aux = head(fused)
    return aux_loss_from_predictions(aux, y)


def aux_loss_from_predictions(aux: Tensor, y) -> Tensor:
    y = np.asarray(y, dtype=aux.dtype)
    return dc.square(aux - y[..., None]).mean()


def normalize_rows(M: Tensor) -> Tensor:
    norms = dc.sqrt(dc.square(M).sum(axis=-1, keepdims=True))
    bad = np.flatnonzero(norms.data.reshape(-1) <= NORM_EPS)
    if bad.size:
        raise DegeneratePrototypeError(
            f"prototype rows {bad.tolist()} have norm <= {NORM_EPS}; cannot normalize"
        )
    return M / norms


def div_loss(M) -> Tensor:
    """||Mbar Mbar^T - I||_F^2 for the row-normalized prototype matrix."""
    M = M.M if hasattr(M, "M") else M
    Mbar = normalize_rows(M)
    gram = Mbar @ Mbar.T
    eye = np.eye(M.shape[0], dtype=M.dtype)
    return dc.square(gram - eye).sum()


def total_loss(l_reg, l_aux, l_div, lambda_aux=0.1, lambda_div=0.001):
    """Returns (total, breakdown). Inputs may be tensors or floats."""
    if lambda_aux < 0 or lambda_div < 0:
        raise ContractError("loss weights must be nonnegative")
    total = l_reg + lambda_aux * l_aux + lambda_div * l_div

    def val(x):
        return float(x.data) if isinstance(x, Tensor) else float(x)

    breakdown = LossBreakdown(
        val(l_reg), val(l_aux), val(l_div), val(total), float(lambda_aux), float(lambda_div)
    )
    return total, breakdown
