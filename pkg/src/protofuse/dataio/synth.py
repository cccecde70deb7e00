"""Synthetic multimodal regression data with controllable informativeness.

Each sample draws one latent scalar per modality, ``s_m ~ U(lo, hi)``.
The label is the informativeness-weighted mix ``y = sum_m w_m s_m``
(clipped to the score range). Every time step of modality ``m`` is

    x = s_m * u_m + N_m c + noise * eps

where ``u_m`` is a fixed unit direction, ``N_m`` a fixed nuisance basis
orthogonal to ``u_m``, ``c`` a standard normal nuisance draw per step and
``eps`` isotropic Gaussian noise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .records import MODALITIES, DatasetManifest, Sample


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_train: int = 256
    n_valid: int = 64
    n_test: int = 128
    lengths: dict = field(
        default_factory=lambda: {"text": (4, 10), "audio": (6, 14), "visual": (5, 12)}
    )
    widths: dict = field(default_factory=lambda: {"text": 12, "audio": 8, "visual": 10})
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    noise: float = 0.1
    score_range: tuple = (-3.0, 3.0)
    nuisance_rank: int = 2

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (3,) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ConfigError(f"informativeness weights must be 3 nonnegative values summing to 1, got {self.weights}")
        if self.noise < 0:
            raise ConfigError("noise level must be nonnegative")
        if min(self.n_train, self.n_valid, self.n_test) < 0:
            raise ConfigError("split sizes must be nonnegative")
        lo, hi = self.score_range
        if not lo < hi:
            raise ConfigError("score range needs low < high")
        for m in MODALITIES:
            a, b = self.lengths[m]
            if not 1 <= a <= b:
                raise ConfigError(f"length range for {m} must satisfy 1 <= min <= max")
            if self.widths[m] < 2:
                raise ConfigError(f"feature width for {m} must be >= 2")

    @classmethod
    def from_dict(cls, raw: dict) -> SynthSpec:
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown generator keys: {', '.join(unknown)}")
        raw = dict(raw)
        if "lengths" in raw:
            raw["lengths"] = {m: tuple(v) for m, v in raw["lengths"].items()}
        for key in ("weights", "score_range"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lengths"] = {m: list(v) for m, v in self.lengths.items()}
        out["weights"] = list(self.weights)
        out["score_range"] = list(self.score_range)
        return out


def load_synth_spec(path) -> SynthSpec:
    return SynthSpec.from_dict(json.loads(Path(path).read_text()))


def _subspace(rng, width, rank):
    """Unit direction plus an orthonormal nuisance basis orthogonal to it."""
    q, _ = np.linalg.qr(rng.standard_normal((width, width)))
    rank = min(rank, width - 1)
    return q[:, 0], q[:, 1 : 1 + rank]


def generate_synthetic(spec: SynthSpec) -> tuple[DatasetManifest, list[Sample]]:
    base = np.random.default_rng([spec.seed, 0])
    bases = {m: _subspace(base, spec.widths[m], spec.nuisance_rank) for m in MODALITIES}
    w = np.asarray(spec.weights, dtype=np.float64)
    lo, hi = spec.score_range

    n_total = spec.n_train + spec.n_valid + spec.n_test
    samples = []
    for i in range(n_total):
        rng = np.random.default_rng([spec.seed, 1, i])
        latents = rng.uniform(lo, hi, size=3)
        label = float(np.clip(w @ latents, lo, hi))
        feats = {}
        for j, m in enumerate(MODALITIES):
            a, b = spec.lengths[m]
            length = int(rng.integers(a, b + 1))
            u, nuisance = bases[m]
            c = rng.standard_normal((length, nuisance.shape[1]))
            eps = rng.standard_normal((length, spec.widths[m]))
            feats[m] = latents[j] * u[None, :] + c @ nuisance.T + spec.noise * eps
        samples.append(Sample(f"s{i:05d}", label, **feats))

    ids = [s.id for s in samples]
    a, b = spec.n_train, spec.n_train + spec.n_valid
    manifest = DatasetManifest(
        score_range=(float(lo), float(hi)),
        widths=dict(spec.widths),
        splits={"train": ids[:a], "valid": ids[a:b], "test": ids[b:]},
    )
    return manifest, samples
