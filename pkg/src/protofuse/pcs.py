"""Prototype-conditioned modality selection.

Column order of every (.., K, 3) structure is fixed to (text, audio, visual).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .diffcore import Module, Tensor
from .errors import SchemaError
from .layers import Linear

COLUMNS = ("t", "a", "v")


@dataclass
class SelectionOutput:
    alpha: Tensor  # (B, K, 3) selection weights
    scores: Tensor | None  # (B, K, 3) raw reliability scores
    fused: Tensor  # (B, K, d)


class ModalityScorer(Module):
    """g([z; m]) : 2d -> d -> 1 with ReLU, shared across slots and modalities."""

    def __init__(self, d, rng, dtype=np.float64):
        self.fc1 = Linear(2 * d, d, rng, dtype)
        self.fc2 = Linear(d, 1, rng, dtype)

    def __call__(self, z: Tensor, prototype: Tensor) -> Tensor:
        if z.shape[-1] != prototype.shape[-1]:
            raise SchemaError(
                f"response width {z.shape[-1]} != prototype width {prototype.shape[-1]}"
            )
        if prototype.shape != z.shape:
            prototype = dc.broadcast_to(prototype, z.shape)
        return self.fc2(dc.relu(self.fc1(dc.concat([z, prototype], axis=-1))))


def score(z_km, m_k, params: ModalityScorer) -> Tensor:
    """Scalar reliability score for a single (slot, modality) pair."""
    z_km, m_k = dc.as_tensor(z_km), dc.as_tensor(m_k)
    if z_km.shape != m_k.shape or z_km.ndim != 1:
        raise SchemaError(f"score needs two vectors of equal length, got {z_km.shape} and {m_k.shape}")
    return params(z_km.reshape(1, -1), m_k.reshape(1, -1)).reshape(())


def fuse(responses, alpha: Tensor) -> Tensor:
    """z_k = sum_m alpha_k^m z_k^m."""
    fused = None
    for i, z in enumerate(responses):
        term = alpha[..., i : i + 1] * z
        fused = term if fused is None else fused + term
    return fused


def select_and_fuse(responses, prototypes, params: ModalityScorer) -> SelectionOutput:
    """``responses``: (Z^t, Z^a, Z^v), each (B, K, d). ``prototypes``: the
    (K, d) matrix each modality is conditioned on; pass the same matrix
    three times for a shared bank."""
    if len(responses) != 3:
        raise SchemaError("expected three modality responses ordered (t, a, v)")
    if not isinstance(prototypes, (list, tuple)):
        prototypes = (prototypes,) * 3
    shape = responses[0].shape
    for z in responses:
        if z.shape != shape:
            raise SchemaError(f"modality responses disagree in shape: {[r.shape for r in responses]}")
    scores = dc.concat([params(z, m) for z, m in zip(responses, prototypes)], axis=-1)
    alpha = dc.softmax(scores, axis=-1)
    return SelectionOutput(alpha, scores, fuse(responses, alpha))


def uniform_fuse(responses) -> SelectionOutput:
    shape = responses[0].shape[:-1] + (3,)
    alpha = Tensor(np.full(shape, 1.0 / 3.0, dtype=responses[0].dtype))
    return SelectionOutput(alpha, None, fuse(responses, alpha))
