"""Per-modality sequence encoders: linear projection into the shared
width, learnable positions, one pre-norm Transformer layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcore import Module, Parameter, Tensor
from .errors import SchemaError
from .layers import Linear, PreNormBlock, normal


@dataclass
class EncodedSequence:
    hidden: Tensor  # (B, L, d)
    mask: np.ndarray  # (B, L) bool
    modality: str


class ModalityEncoder(Module):
    def __init__(self, modality, d_in, d, heads, rng, *, ffn_mult=4, max_len=128,
                 positions=True, p=0.0, dtype=np.float64):
        self.modality = modality
        self.d_in = d_in
        self.proj = Linear(d_in, d, rng, dtype)
        self.pos = Parameter(normal(rng, (max_len, d), dtype), decay=False) if positions else None
        self.block = PreNormBlock(d, heads, ffn_mult * d, rng, dtype, p)

    def __call__(self, x, mask, training=False, rng=None) -> EncodedSequence:
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 3 or x.shape[-1] != self.d_in:
            raise SchemaError(
                f"{self.modality} encoder expects (batch, length, {self.d_in}) features, got {x.shape}"
            )
        mask = np.asarray(mask, dtype=bool)
        length = x.shape[1]
        h = self.proj(x)
        if self.pos is not None:
            if length > self.pos.shape[0]:
                raise SchemaError(
                    f"{self.modality} sequence length {length} exceeds max_len {self.pos.shape[0]}"
                )
            h = h + self.pos[:length]
        h = self.block(h, key_mask=mask, training=training, rng=rng)
        h = h * mask[:, :, None].astype(h.dtype)
        return EncodedSequence(h, mask, self.modality)
