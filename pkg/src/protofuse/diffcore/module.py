"""Parameter containers with deterministic registration order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor


class Parameter(Tensor):
    """A trainable leaf. ``decay`` marks whether weight decay applies."""

    __slots__ = ("decay",)

    def __init__(self, data, decay=True, name=None):
        super().__init__(np.array(data, copy=True), requires_grad=True, name=name)
        self.decay = decay


class Module:
    """Parameters and submodules are discovered in attribute assignment
    order, which fixes the checkpoint blob order."""

    def named_parameters(self, prefix="", _seen=None):
        seen = set() if _seen is None else _seen
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            yield from _walk(value, name, seen)

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None


def _walk(value, name, seen):
    if isinstance(value, Parameter):
        if id(value) not in seen:
            seen.add(id(value))
            yield name, value
    elif isinstance(value, Module):
        if id(value) not in seen:
            seen.add(id(value))
            yield from value.named_parameters(prefix=name + ".", _seen=seen)
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}", seen)
    elif isinstance(value, dict):
        for key, item in value.items():
            yield from _walk(item, f"{name}.{key}", seen)


@dataclass(frozen=True)
class RngState:
    """Counter-based seeding: every random draw is keyed by
    ``(seed, stream, counter)`` through numpy's PCG64, so any step can be
    replayed without carrying generator state around."""

    seed: int
    algorithm: str = "numpy.PCG64/SeedSequence"

    INIT = 0
    DROPOUT = 1
    SHUFFLE = 2

    def generator(self, stream: int, *counter: int) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64([self.seed, stream, *counter]))
