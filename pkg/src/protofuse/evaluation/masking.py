"""Missing-modality evaluation: selected modalities are replaced by zero
feature matrices of the same shape; validity masks are left untouched."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataio import MODALITIES, MODALITY_CODES, split_samples
from ..errors import ConfigError
from ..model import predict_samples
from .metrics import MetricReport, compute_metrics


@dataclass(frozen=True)
class MaskSpec:
    modalities: frozenset = frozenset()

    def __post_init__(self):
        mods = frozenset(self.modalities)
        unknown = mods - set(MODALITIES)
        if unknown:
            raise ConfigError(f"unknown modalities in mask: {sorted(unknown)}")
        if len(mods) >= len(MODALITIES):
            raise ConfigError("mask must leave at least one modality")
        object.__setattr__(self, "modalities", mods)

    @classmethod
    def parse(cls, text: str) -> MaskSpec:
        """Parse ``"t,a"``-style codes; the empty string masks nothing."""
        codes = [c.strip() for c in text.split(",") if c.strip()]
        bad = [c for c in codes if c not in MODALITY_CODES]
        if bad:
            raise ConfigError(f"unknown modality codes {bad}; use t, a, v")
        return cls(frozenset(MODALITY_CODES[c] for c in codes))

    @property
    def codes(self) -> str:
        return ",".join(c for c, m in MODALITY_CODES.items() if m in self.modalities)

    @property
    def remaining(self) -> tuple:
        return tuple(m for m in MODALITIES if m not in self.modalities)


def apply_mask(samples, mask: MaskSpec):
    if not mask.modalities:
        return list(samples)
    return [
        s.with_features(**{m: np.zeros_like(s.features(m)) for m in mask.modalities})
        for s in samples
    ]


def eval_masked(model, manifest, samples, mask: MaskSpec, split="test",
                batch_size=256) -> MetricReport:
    subset = apply_mask(split_samples(manifest, samples, split), mask)
    preds = predict_samples(model, subset, batch_size)
    labels = np.array([s.label for s in subset])
    return compute_metrics(preds, labels, manifest.score_range)


def evaluate(model, manifest, samples, split="test", batch_size=256) -> MetricReport:
    return eval_masked(model, manifest, samples, MaskSpec(), split, batch_size)
