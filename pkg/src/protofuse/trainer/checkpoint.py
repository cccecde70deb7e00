"""Single-file versioned checkpoint.

Layout (all integers little-endian)::

    b"PFCK"                      magic, 4 bytes
    u16 version                  currently 1
    u32 header_len
    header_len bytes of UTF-8 JSON:
        {"config": {...}, "widths": {...}, "score_range": [lo, hi],
         "step": int, "seed": int, "rng_algorithm": str,
         "best_valid_mae": float | null, "optimizer_t": int,
         "blobs": [{"name": str, "dtype": "<f8", "shape": [...]}, ...]}
    blob payloads, raw C-order bytes, concatenated in header order

Blob order is: model parameters in registration order, then the first
moments ``adam.m/<name>``, then the second moments ``adam.v/<name>``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataio import Config
from ..diffcore import RngState
from ..errors import SchemaError

MAGIC = b"PFCK"
VERSION = 1


@dataclass
class Checkpoint:
    config: Config
    widths: dict
    score_range: tuple
    params: dict  # name -> ndarray, registration order
    step: int = 0
    rng: RngState | None = None
    optimizer_t: int = 0
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    best_valid_mae: float | None = None

    def save(self, path) -> None:
        save_checkpoint(self, path)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    blobs = [(n, a) for n, a in ckpt.params.items()]
    blobs += [(f"adam.m/{n}", a) for n, a in ckpt.adam_m.items()]
    blobs += [(f"adam.v/{n}", a) for n, a in ckpt.adam_v.items()]
    rng = ckpt.rng or RngState(ckpt.config.seed)
    header = {
        "config": ckpt.config.to_dict(),
        "widths": dict(ckpt.widths),
        "score_range": list(ckpt.score_range),
        "step": int(ckpt.step),
        "seed": int(rng.seed),
        "rng_algorithm": rng.algorithm,
        "best_valid_mae": ckpt.best_valid_mae,
        "optimizer_t": int(ckpt.optimizer_t),
        "blobs": [
            {"name": n, "dtype": np.asarray(a).dtype.newbyteorder("<").str, "shape": list(np.shape(a))}
            for n, a in blobs
        ],
    }
    raw = json.dumps(header).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(raw)))
        fh.write(raw)
        for meta, (_, arr) in zip(header["blobs"], blobs):
            fh.write(np.ascontiguousarray(arr, dtype=meta["dtype"]).tobytes())
    tmp.replace(path)


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SchemaError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise SchemaError(f"{path}: unsupported checkpoint version {version}")
    offset = 4 + struct.calcsize("<HI")
    header = json.loads(data[offset : offset + hlen].decode("utf-8"))
    offset += hlen
    arrays = {}
    for meta in header["blobs"]:
        dt = np.dtype(meta["dtype"])
        count = int(np.prod(meta["shape"], dtype=np.int64))
        nbytes = count * dt.itemsize
        if offset + nbytes > len(data):
            raise SchemaError(f"{path}: truncated blob {meta['name']!r}")
        arr = np.frombuffer(data, dtype=dt, count=count, offset=offset).reshape(meta["shape"])
        arrays[meta["name"]] = arr.astype(dt.newbyteorder("="), copy=True)
        offset += nbytes
    params = {n: a for n, a in arrays.items() if not n.startswith("adam.")}
    adam_m = {n[len("adam.m/"):]: a for n, a in arrays.items() if n.startswith("adam.m/")}
    adam_v = {n[len("adam.v/"):]: a for n, a in arrays.items() if n.startswith("adam.v/")}
    return Checkpoint(
        config=Config.from_dict(header["config"]),
        widths=header["widths"],
        score_range=tuple(header["score_range"]),
        params=params,
        step=header["step"],
        rng=RngState(header["seed"], header["rng_algorithm"]),
        optimizer_t=header["optimizer_t"],
        adam_m=adam_m,
        adam_v=adam_v,
        best_valid_mae=header["best_valid_mae"],
    )


def model_state(model) -> dict:
    return {name: p.data.copy() for name, p in model.named_parameters()}


def load_model_state(model, params: dict) -> None:
    named = dict(model.named_parameters())
    if list(named) != list(params):
        missing = sorted(set(named) - set(params))
        extra = sorted(set(params) - set(named))
        raise SchemaError(f"checkpoint/model parameter mismatch; missing={missing[:3]} extra={extra[:3]}")
    for name, p in named.items():
        arr = params[name]
        if arr.shape != p.shape:
            raise SchemaError(f"shape mismatch for {name}: {arr.shape} vs {p.shape}")
        p.data[...] = arr
