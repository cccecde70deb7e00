"""Sentiment prototype bank: K learnable queries read every modality
through modality-specific cross-attention, giving slot-aligned responses."""

from __future__ import annotations

import numpy as np

from . import diffcore as dc
from .diffcore import Module, Parameter, Tensor
from .encoders import EncodedSequence
from .errors import SchemaError
from .layers import FeedForward, LayerNorm, MultiHeadAttention, normal


class PrototypeBank(Module):
    def __init__(self, K, d, rng, dtype=np.float64):
        self.M = Parameter(normal(rng, (K, d), dtype), decay=False)

    @property
    def K(self):
        return self.M.shape[0]

    @property
    def d(self):
        return self.M.shape[1]


class CrossAttentionExtractor(Module):
    """Z~ = LN(M + CrossAttn(M, H, H));  Z = LN(Z~ + FFN(Z~))."""

    def __init__(self, d, heads, rng, *, ffn_mult=4, p=0.0, dtype=np.float64):
        self.attn = MultiHeadAttention(d, heads, rng, dtype, p)
        self.ln1 = LayerNorm(d, dtype)
        self.ffn = FeedForward(d, ffn_mult * d, rng, dtype, p)
        self.ln2 = LayerNorm(d, dtype)

    def __call__(self, bank: PrototypeBank, seq: EncodedSequence, training=False, rng=None):
        return extract(bank, seq, self, training, rng)


def extract(bank: PrototypeBank, seq: EncodedSequence, params: CrossAttentionExtractor,
            training=False, rng=None) -> Tensor:
    """Prototype response Z^m, shape (B, K, d)."""
    if seq.hidden.shape[-1] != bank.d:
        raise SchemaError(
            f"{seq.modality} hidden width {seq.hidden.shape[-1]} != prototype width {bank.d}"
        )
    M = bank.M
    attended = params.attn(M, seq.hidden, seq.mask, training, rng)
    z_tilde = params.ln1(M + attended)
    return params.ln2(z_tilde + params.ffn(z_tilde, training, rng))


def mean_pool_fallback(seq: EncodedSequence, K: int) -> Tensor:
    """Masked temporal mean broadcast to K identical rows, (B, K, d)."""
    mask = seq.mask.astype(seq.hidden.dtype)
    counts = np.maximum(mask.sum(axis=1, keepdims=True), 1.0)  # (B, 1)
    pooled = (seq.hidden * mask[:, :, None]).sum(axis=1) / counts  # (B, d)
    b, d = pooled.shape
    return dc.broadcast_to(pooled.reshape(b, 1, d), (b, K, d))
