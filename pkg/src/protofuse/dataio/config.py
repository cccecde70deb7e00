"""Run configuration. Stored as a flat JSON object; unknown keys fail."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ..errors import ConfigError

ABLATIONS = ("no_spb", "no_selection", "no_fine_path", "no_dmr_gates", "no_shared_proto")


@dataclass(frozen=True)
class Config:
    K: int = 8
    d: int = 128
    heads: int = 8
    layers: int = 2
    batch_size: int = 64
    dropout: float = 0.1
    lambda_aux: float = 0.1
    lambda_div: float = 0.001
    lr: float = 1e-3
    weight_decay: float = 0.01
    warmup_steps: int = 200
    total_steps: int = 2000
    seed: int = 0
    # ablations; at most one may be set
    no_spb: bool = False
    no_selection: bool = False
    no_fine_path: bool = False
    no_dmr_gates: bool = False
    no_shared_proto: bool = False
    # artifact-level knobs
    ffn_mult: int = 4
    max_len: int = 128
    encoder_positions: bool = True
    per_slot_aux: bool = False
    dtype: str = "float64"
    grad_clip: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    eval_batch_size: int = 256

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"K must be >= 1, got {self.K}")
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.heads < 1 or self.d % self.heads:
            raise ConfigError(f"d={self.d} must be divisible by heads={self.heads}")
        if self.d < 2:
            raise ConfigError("d must be at least 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lambda_aux < 0 or self.lambda_div < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ConfigError("batch sizes must be >= 1")
        if self.total_steps < 1 or not 0 <= self.warmup_steps <= self.total_steps:
            raise ConfigError("need 0 <= warmup_steps <= total_steps and total_steps >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype!r}")
        if self.max_len < 1 or self.ffn_mult < 1:
            raise ConfigError("max_len and ffn_mult must be >= 1")

    @property
    def active_ablations(self) -> list[str]:
        return [name for name in ABLATIONS if getattr(self, name)]

    @property
    def variant(self) -> str:
        active = self.active_ablations
        if len(active) > 1:
            raise ConfigError(f"at most one ablation flag may be set, got {active}")
        return active[0] if active else "full"

    def with_variant(self, variant: str) -> Config:
        if variant != "full" and variant not in ABLATIONS:
            raise ConfigError(f"unknown variant {variant!r}")
        flags = {name: name == variant for name in ABLATIONS}
        return replace(self, **flags)

    def replace(self, **changes) -> Config:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> Config:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = {}
        for key, value in raw.items():
            want = known[key].type
            if want == "bool" and not isinstance(value, bool):
                raise ConfigError(f"config key {key!r} must be a boolean")
            if want == "int":
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"config key {key!r} must be an integer")
            if want == "float":
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"config key {key!r} must be a number")
                value = float(value)
            if want == "str" and not isinstance(value, str):
                raise ConfigError(f"config key {key!r} must be a string")
            values[key] = value
        return cls(**values)


def load_config(path) -> Config:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a flat JSON object")
    return Config.from_dict(raw)


def save_config(config: Config, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")
