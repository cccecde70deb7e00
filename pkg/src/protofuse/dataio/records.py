"""On-disk dataset format.

A dataset directory holds two files:

``samples.jsonl``
    One JSON object per line: ``{"id": str, "label": number,
    "text": [[...], ...], "audio": [[...], ...], "visual": [[...], ...]}``.
    Each feature value is a non-empty list of equal-width rows.
``manifest.json``
    ``{"score_range": [lo, hi], "widths": {"text": dt, "audio": da,
    "visual": dv}, "splits": {"train": [ids], "valid": [ids], "test": [ids]}}``
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataValidationError, ParseError, SchemaError

MODALITIES = ("text", "audio", "visual")
MODALITY_CODES = {"t": "text", "a": "audio", "v": "visual"}
SPLITS = ("train", "valid", "test")
SAMPLES_FILE = "samples.jsonl"
MANIFEST_FILE = "manifest.json"


@dataclass
class Sample:
    id: str
    label: float
    text: np.ndarray
    audio: np.ndarray
    visual: np.ndarray

    def features(self, modality: str) -> np.ndarray:
        return getattr(self, modality)

    def with_features(self, **changes) -> Sample:
        values = {m: getattr(self, m) for m in MODALITIES}
        values.update(changes)
        return Sample(self.id, self.label, **values)

    def to_record(self) -> dict:
        rec = {"id": self.id, "label": float(self.label)}
        for m in MODALITIES:
            rec[m] = getattr(self, m).tolist()
        return rec


@dataclass
class DatasetManifest:
    score_range: tuple[float, float]
    widths: dict[str, int]
    splits: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = self.score_range
        if not lo < hi:
            raise DataValidationError(f"score range needs low < high, got {self.score_range}")
        seen: dict[str, str] = {}
        for split, ids in self.splits.items():
            if split not in SPLITS:
                raise DataValidationError(f"unknown split {split!r}")
            for sid in ids:
                if sid in seen:
                    raise DataValidationError(
                        f"id {sid!r} appears in both {seen[sid]!r} and {split!r} splits"
                    )
                seen[sid] = split

    def to_dict(self) -> dict:
        return {
            "score_range": list(self.score_range),
            "widths": dict(self.widths),
            "splits": {k: list(v) for k, v in self.splits.items()},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> DatasetManifest:
        try:
            lo, hi = raw["score_range"]
            widths = {m: int(raw["widths"][m]) for m in MODALITIES}
            splits = {k: [str(i) for i in v] for k, v in raw.get("splits", {}).items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed manifest: {exc}") from exc
        return cls((float(lo), float(hi)), widths, splits)


def _matrix(value, modality, line) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SchemaError(f"line {line}: {modality} must be a non-empty list of rows")
    width = None
    for row in value:
        if not isinstance(row, list):
            raise SchemaError(f"line {line}: {modality} rows must be lists")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"line {line}: ragged {modality} matrix")
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"line {line}: non-numeric {modality} entry") from exc
    if width == 0:
        raise SchemaError(f"line {line}: {modality} rows are empty")
    return arr


def parse_samples(lines, manifest: DatasetManifest | None = None) -> list[Sample]:
    widths = dict(manifest.widths) if manifest is not None else {}
    samples = []
    ids = set()
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed record ({exc.msg})", line=n) from exc
        if not isinstance(rec, dict):
            raise ParseError("record is not an object", line=n)
        missing = [k for k in ("id", "label", *MODALITIES) if k not in rec]
        if missing:
            raise ParseError(f"missing fields {missing}", line=n)
        label = rec["label"]
        if isinstance(label, bool) or not isinstance(label, (int, float)) or not math.isfinite(label):
            raise ParseError("label must be a finite number", line=n)
        feats = {}
        for m in MODALITIES:
            arr = _matrix(rec[m], m, n)
            expected = widths.setdefault(m, arr.shape[1])
            if arr.shape[1] != expected:
                raise SchemaError(
                    f"line {n}: {m} width {arr.shape[1]} does not match dataset width {expected}"
                )
            feats[m] = arr
        if manifest is not None:
            lo, hi = manifest.score_range
            if not lo <= label <= hi:
                raise DataValidationError(
                    f"line {n}: label {label} outside score range [{lo}, {hi}]"
                )
        sid = str(rec["id"])
        if sid in ids:
            raise DataValidationError(f"line {n}: duplicate id {sid!r}")
        ids.add(sid)
        samples.append(Sample(sid, float(label), **feats))
    return samples


def _resolve(path) -> tuple[Path, Path]:
    path = Path(path)
    if path.is_dir():
        return path / SAMPLES_FILE, path / MANIFEST_FILE
    return path, path.with_name(MANIFEST_FILE)


def load_dataset(path) -> tuple[DatasetManifest, list[Sample]]:
    samples_path, manifest_path = _resolve(path)
    if not samples_path.exists():
        raise FileNotFoundError(f"no dataset file at {samples_path}")
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest sidecar at {manifest_path}")
    manifest = DatasetManifest.from_dict(json.loads(manifest_path.read_text()))
    with samples_path.open() as fh:
        samples = parse_samples(fh, manifest)
    known = {s.id for s in samples}
    for split, ids in manifest.splits.items():
        absent = [i for i in ids if i not in known]
        if absent:
            raise DataValidationError(f"split {split!r} names unknown ids {absent[:3]}")
    return manifest, samples


def save_dataset(path, manifest: DatasetManifest, samples) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    with (out / SAMPLES_FILE).open("w") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record()) + "\n")
    (out / MANIFEST_FILE).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return out


def split_samples(manifest: DatasetManifest, samples, split: str) -> list[Sample]:
    by_id = {s.id: s for s in samples}
    return [by_id[i] for i in manifest.splits.get(split, [])]
