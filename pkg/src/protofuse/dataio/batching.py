from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import MODALITIES, Sample


@dataclass
class Batch:
    ids: list[str]
    labels: np.ndarray  # (B,)
    features: dict  # modality -> (B, L_max, d_m), zero padded
    masks: dict  # modality -> (B, L_max) bool, True on real positions

    def __len__(self):
        return len(self.ids)


def collate(samples: list[Sample], dtype=np.float64) -> Batch:
    feats, masks = {}, {}
    for m in MODALITIES:
        mats = [s.features(m) for s in samples]
        longest = max(x.shape[0] for x in mats)
        width = mats[0].shape[1]
        out = np.zeros((len(mats), longest, width), dtype=dtype)
        mask = np.zeros((len(mats), longest), dtype=bool)
        for i, x in enumerate(mats):
            out[i, : x.shape[0]] = x
            mask[i, : x.shape[0]] = True
        feats[m] = out
        masks[m] = mask
    labels = np.array([s.label for s in samples], dtype=dtype)
    return Batch([s.id for s in samples], labels, feats, masks)


def batch_iter(samples, batch_size: int, rng=None, shuffle=False, dtype=np.float64):
    """Yield padded batches. ``rng`` (a numpy Generator) drives shuffling."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(samples))
    if shuffle:
        if rng is None:
            raise ValueError("shuffle=True needs an rng")
        order = rng.permutation(len(samples))
    for start in range(0, len(samples), batch_size):
        yield collate([samples[i] for i in order[start : start + batch_size]], dtype)
