"""Gated Transformer backbone over [cls; Z_fused; Z^t; Z^a; Z^v].

After each layer's attention and feed-forward sub-blocks, the updated cls
token yields a sigmoid gate per modality that rescales that modality's K
response tokens. cls and fused tokens are never gated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from .diffcore import Module, Parameter, Tensor
from .errors import SchemaError
from .layers import LayerNorm, Linear, PreNormBlock, normal


@dataclass
class BackboneTrace:
    gates: list = field(default_factory=list)  # per layer, (B, 3) tensors in (t, a, v) order
    cls_hidden: Tensor | None = None  # (B, d), after the final layer norm
    prediction: Tensor | None = None  # (B,)


def sequence_length(K: int, fine_path: bool = True) -> int:
    return 1 + 4 * K if fine_path else 1 + K


def assemble_tokens(fused: Tensor, responses, cls: Tensor, pos: Tensor) -> Tensor:
    """(B, 1+4K, d) token sequence, or (B, 1+K, d) when ``responses`` is empty."""
    if fused.ndim != 3:
        raise SchemaError(f"fused prototypes must be (batch, K, d), got {fused.shape}")
    b, K, d = fused.shape
    if cls.shape != (d,):
        raise SchemaError(f"cls token must have shape ({d},), got {cls.shape}")
    for z in responses:
        if z.shape != fused.shape:
            raise SchemaError(f"response shape {z.shape} != fused shape {fused.shape}")
    groups = [dc.broadcast_to(cls.reshape(1, 1, d), (b, 1, d)), fused, *responses]
    tokens = dc.concat(groups, axis=1)
    if pos.shape != tokens.shape[1:]:
        raise SchemaError(
            f"positional table {pos.shape} does not match token layout {tokens.shape[1:]}"
        )
    return tokens + pos


def gate_expansion(K: int, dtype=np.float64):
    """Constant (3, 1+4K) selector E and offset c such that
    ``g @ E + c`` is the per-token multiplier: 1 on cls/fused, g_m on the
    K tokens of modality m."""
    T = 1 + 4 * K
    E = np.zeros((3, T), dtype=dtype)
    for m in range(3):
        start = 1 + K * (m + 1)
        E[m, start : start + K] = 1.0
    c = np.zeros(T, dtype=dtype)
    c[: 1 + K] = 1.0
    return E, c


class BackboneLayer(Module):
    def __init__(self, d, heads, rng, *, ffn_mult=4, p=0.0, gated=True, dtype=np.float64):
        self.block = PreNormBlock(d, heads, ffn_mult * d, rng, dtype, p)
        self.gate = Linear(d, 3, rng, dtype) if gated else None

    def mix(self, x, training=False, rng=None):
        return self.block(x, training=training, rng=rng)

    def gate_values(self, x: Tensor) -> Tensor:
        """g = sigmoid(W h_cls + b), shape (B, 3)."""
        return dc.sigmoid(self.gate(x[:, 0, :]))


def apply_gates(x: Tensor, gates: Tensor, K: int) -> Tensor:
    E, c = gate_expansion(K, x.dtype)
    mult = gates @ E + c  # (B, T)
    return x * mult.reshape(mult.shape[0], mult.shape[1], 1)


class GatedBackbone(Module):
    def __init__(self, d, heads, layers, K, rng, *, ffn_mult=4, p=0.0,
                 gated=True, fine_path=True, dtype=np.float64):
        self.K = K
        self.fine_path = fine_path
        self.gated = gated and fine_path
        self.cls = Parameter(normal(rng, (d,), dtype), decay=False)
        self.pos = Parameter(normal(rng, (sequence_length(K, fine_path), d), dtype), decay=False)
        self.layers = [
            BackboneLayer(d, heads, rng, ffn_mult=ffn_mult, p=p, gated=self.gated, dtype=dtype)
            for _ in range(layers)
        ]
        self.final_ln = LayerNorm(d, dtype)
        self.head = RegressionHead(d, rng, dtype)

    def tokens(self, fused, responses):
        return assemble_tokens(fused, responses if self.fine_path else (), self.cls, self.pos)

    def forward(self, tokens: Tensor, training=False, rng=None) -> BackboneTrace:
        trace = BackboneTrace()
        x = tokens
        for layer in self.layers:
            x = layer.mix(x, training, rng)
            if layer.gate is not None:
                g = layer.gate_values(x)
                trace.gates.append(g)
                x = apply_gates(x, g, self.K)
        trace.cls_hidden = self.final_ln(x[:, 0, :])
        trace.prediction = self.head(trace.cls_hidden)
        return trace

    __call__ = forward


class RegressionHead(Module):
    """d -> d/2 -> 1 with ReLU."""

    def __init__(self, d, rng, dtype=np.float64):
        self.fc1 = Linear(d, max(d // 2, 1), rng, dtype)
        self.fc2 = Linear(max(d // 2, 1), 1, rng, dtype)

    def __call__(self, h: Tensor) -> Tensor:
        out = self.fc2(dc.relu(self.fc1(h)))
        return out.reshape(out.shape[:-1])


def predict(trace: BackboneTrace, head: RegressionHead) -> Tensor:
    if trace.cls_hidden is None:
        raise SchemaError("trace carries no cls hidden state")
    return head(trace.cls_hidden)
