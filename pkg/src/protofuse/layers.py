"""Transformer building blocks shared by the encoders, the prototype bank
and the backbone."""

from __future__ import annotations

import math

import numpy as np

from . import diffcore as dc
from .diffcore import Module, Parameter, Tensor
from .errors import ConfigError, DimensionError

LN_EPS = 1e-5
INIT_STD = 0.02


def xavier(rng, fan_in, fan_out, dtype):
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


def normal(rng, shape, dtype, std=INIT_STD):
    return (rng.standard_normal(shape) * std).astype(dtype)


class Linear(Module):
    """y = x W + b with W stored (fan_in, fan_out)."""

    def __init__(self, fan_in, fan_out, rng, dtype=np.float64, bias=True):
        self.weight = Parameter(xavier(rng, fan_in, fan_out, dtype))
        self.bias = Parameter(np.zeros(fan_out, dtype=dtype), decay=False) if bias else None

    @property
    def fan_in(self):
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        x = dc.as_tensor(x, self.weight.dtype)
        if x.shape[-1] != self.fan_in:
            raise DimensionError(
                f"linear layer expects width {self.fan_in}, got input shape {x.shape}"
            )
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class LayerNorm(Module):
    def __init__(self, d, dtype=np.float64, eps=LN_EPS):
        self.gain = Parameter(np.ones(d, dtype=dtype), decay=False)
        self.bias = Parameter(np.zeros(d, dtype=dtype), decay=False)
        self.eps = eps

    def __call__(self, x):
        return dc.layer_norm(x, self.gain, self.bias, self.eps)


class FeedForward(Module):
    """Linear -> ReLU -> dropout -> Linear."""

    def __init__(self, d, hidden, rng, dtype=np.float64, p=0.0):
        self.fc1 = Linear(d, hidden, rng, dtype)
        self.fc2 = Linear(hidden, d, rng, dtype)
        self.p = p

    def __call__(self, x, training=False, rng=None):
        h = dc.relu(self.fc1(x))
        h = dc.dropout(h, self.p, rng, training)
        return self.fc2(h)


class MultiHeadAttention(Module):
    """Scaled dot-product attention with ``heads`` heads and an output
    projection. Queries may be unbatched (Lq, d) and are then shared
    across the batch of keys."""

    def __init__(self, d, heads, rng, dtype=np.float64, p=0.0):
        if d % heads:
            raise ConfigError(f"hidden size {d} is not divisible by {heads} heads")
        self.q = Linear(d, d, rng, dtype)
        self.k = Linear(d, d, rng, dtype)
        self.v = Linear(d, d, rng, dtype)
        self.o = Linear(d, d, rng, dtype)
        self.heads = heads
        self.p = p

    def _split(self, x):
        # (B, L, d) -> (B, H, L, dh)
        b, n, d = x.shape
        return x.reshape(b, n, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def attention_weights(self, query, keys, key_mask=None):
        """Returns the (B, H, Lq, Lk) attention probabilities."""
        q = self.q(query)
        if q.ndim == 2:
            q = q.reshape(1, *q.shape)
        k = self.k(keys)
        qh, kh = self._split(q), self._split(k)
        dh = q.shape[-1] // self.heads
        scores = (qh @ dc.swapaxes(kh, -1, -2)) * (1.0 / math.sqrt(dh))
        mask = None if key_mask is None else np.asarray(key_mask, dtype=bool)[:, None, None, :]
        return dc.softmax(scores, axis=-1, mask=mask)

    def __call__(self, query, keys, key_mask=None, training=False, rng=None):
        attn = self.attention_weights(query, keys, key_mask)
        attn = dc.dropout(attn, self.p, rng, training)
        vh = self._split(self.v(keys))
        ctx = attn @ vh
        b, h, n, dh = ctx.shape
        return self.o(ctx.transpose(0, 2, 1, 3).reshape(b, n, h * dh))


class PreNormBlock(Module):
    """x + SelfAttn(LN(x)) followed by x + FFN(LN(x))."""

    def __init__(self, d, heads, ffn_hidden, rng, dtype=np.float64, p=0.0):
        self.ln1 = LayerNorm(d, dtype)
        self.attn = MultiHeadAttention(d, heads, rng, dtype, p)
        self.ln2 = LayerNorm(d, dtype)
        self.ffn = FeedForward(d, ffn_hidden, rng, dtype, p)

    def __call__(self, x, key_mask=None, training=False, rng=None):
        h = self.ln1(x)
        x = x + self.attn(h, h, key_mask, training, rng)
        return x + self.ffn(self.ln2(x), training, rng)
