from __future__ import annotations

import math
import warnings
from dataclasses import dataclass


@dataclass(frozen=True)
class Schedule:
    warmup_steps: int
    total_steps: int
    base_lr: float


def lr_at(step: int, schedule: Schedule) -> float:
    """Linear warmup to ``base_lr`` then cosine decay to 0 at ``total_steps``."""
    w, total, base = schedule.warmup_steps, schedule.total_steps, schedule.base_lr
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if step > total:
        warnings.warn(f"step {step} beyond schedule end {total}; lr clamped to 0", stacklevel=2)
        return 0.0
    if step < w:
        return base * step / w
    if total == w:
        return base
    progress = (step - w) / (total - w)
    return base * 0.5 * (1.0 + math.cos(math.pi * progress))
