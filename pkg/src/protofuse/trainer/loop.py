"""Training loop with per-epoch validation and bit-exact resumption.

All randomness is keyed by ``(seed, stream, counter)``: the shuffle order
of epoch ``e`` and the dropout masks of step ``s`` are recomputed from the
seed, so a run resumed from a checkpoint replays the uninterrupted run.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import numpy as np

from ..dataio import Config, DatasetManifest, collate, split_samples
from ..diffcore import RngState, backward
from ..errors import DataValidationError, TrainingDivergedError
from ..model import build_variant, predict_samples
from .checkpoint import Checkpoint, load_model_state, model_state
from .optim import AdamW, clip_grad_norm
from .schedule import Schedule, lr_at

log = logging.getLogger(__name__)


class Trainer:
    def __init__(self, config: Config, manifest: DatasetManifest, samples, *,
                 model=None, log_path=None, dump_dir=None):
        self.config = config
        self.manifest = manifest
        self.train_set = split_samples(manifest, samples, "train")
        self.valid_set = split_samples(manifest, samples, "valid")
        if not self.train_set:
            raise DataValidationError("training split is empty")
        self.model = model if model is not None else build_variant(config, manifest.widths)
        self.params = self.model.parameters()
        self.names = [n for n, _ in self.model.named_parameters()]
        self.optimizer = AdamW(
            self.params, config.weight_decay, (config.beta1, config.beta2), config.adam_eps
        )
        self.schedule = Schedule(config.warmup_steps, config.total_steps, config.lr)
        self.rng = RngState(config.seed)
        self.dtype = np.dtype(config.dtype)
        self.step = 0
        self.best_valid_mae = None
        self.best: Checkpoint | None = None
        self.records: list[dict] = []
        self.log_path = Path(log_path) if log_path else None
        self.dump_dir = Path(dump_dir) if dump_dir else None
        self.batches_per_epoch = math.ceil(len(self.train_set) / config.batch_size)
        self._epoch_cache = (None, None)

    # ------------------------------------------------------------ batches

    def _epoch_order(self, epoch: int):
        cached_epoch, order = self._epoch_cache
        if cached_epoch != epoch:
            order = self.rng.generator(RngState.SHUFFLE, epoch).permutation(len(self.train_set))
            self._epoch_cache = (epoch, order)
        return order

    def batch_for_step(self, step: int):
        epoch, pos = divmod(step, self.batches_per_epoch)
        order = self._epoch_order(epoch)
        bs = self.config.batch_size
        return collate([self.train_set[i] for i in order[pos * bs : (pos + 1) * bs]], self.dtype)

    # ------------------------------------------------------------ steps

    def _emit(self, record: dict):
        self.records.append(record)
        if self.log_path is not None:
            with self.log_path.open("a") as fh:
                fh.write(json.dumps(record) + "\n")

    def train_step(self) -> dict:
        batch = self.batch_for_step(self.step)
        dropout_rng = self.rng.generator(RngState.DROPOUT, self.step)
        for p in self.params:
            p.grad = None
        total, parts, _ = self.model.loss(batch, training=True, rng=dropout_rng)
        if not np.isfinite(total.data):
            self._diverged(batch, parts)
        backward(total)
        grad_norm = clip_grad_norm(self.params, self.config.grad_clip)
        lr = lr_at(self.step + 1, self.schedule)
        self.optimizer.step(lr)
        self.step += 1
        record = {
            "kind": "step",
            "step": self.step,
            "l_reg": parts.l_reg,
            "l_aux": parts.l_aux,
            "l_div": parts.l_div,
            "total": parts.total,
            "lr": lr,
            "grad_norm": grad_norm,
        }
        self._emit(record)
        if self.step % self.batches_per_epoch == 0 or self.step == self.config.total_steps:
            self.validate()
        return record

    def _diverged(self, batch, parts):
        info = {"step": self.step, "batch_ids": batch.ids, "loss": parts.to_dict()}
        dump = None
        if self.dump_dir is not None:
            self.dump_dir.mkdir(parents=True, exist_ok=True)
            dump = self.dump_dir / f"diverged_step{self.step}.json"
            dump.write_text(json.dumps(info, indent=2, default=str))
        raise TrainingDivergedError(
            f"non-finite loss at step {self.step} on batch {batch.ids}", batch.ids, dump
        )

    def validate(self) -> float | None:
        if not self.valid_set:
            self.best = self.checkpoint()
            return None
        preds = predict_samples(self.model, self.valid_set, self.config.eval_batch_size)
        labels = np.array([s.label for s in self.valid_set])
        mae = float(np.mean(np.abs(preds - labels)))
        self._emit({"kind": "valid", "step": self.step, "valid_mae": mae})
        if self.best_valid_mae is None or mae < self.best_valid_mae:
            self.best_valid_mae = mae
            self.best = self.checkpoint()
        return mae

    def run(self, until: int | None = None, stop_when=None) -> list[dict]:
        """Train up to ``until`` (default: the configured total). ``stop_when``
        is called with the trainer after every step; returning True ends
        the run early."""
        stop = self.config.total_steps if until is None else min(until, self.config.total_steps)
        while self.step < stop:
            self.train_step()
            if stop_when is not None and stop_when(self):
                break
        return self.records

    # ------------------------------------------------------------ state

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            config=self.config,
            widths=dict(self.manifest.widths),
            score_range=tuple(self.manifest.score_range),
            params=model_state(self.model),
            step=self.step,
            rng=self.rng,
            optimizer_t=self.optimizer.t,
            adam_m={n: m.copy() for n, m in zip(self.names, self.optimizer.m)},
            adam_v={n: v.copy() for n, v in zip(self.names, self.optimizer.v)},
            best_valid_mae=self.best_valid_mae,
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, manifest, samples, **kwargs) -> Trainer:
        trainer = cls(ckpt.config, manifest, samples, **kwargs)
        load_model_state(trainer.model, ckpt.params)
        trainer.step = ckpt.step
        trainer.optimizer.t = ckpt.optimizer_t
        for i, name in enumerate(trainer.names):
            if name in ckpt.adam_m:
                trainer.optimizer.m[i][...] = ckpt.adam_m[name]
                trainer.optimizer.v[i][...] = ckpt.adam_v[name]
        trainer.best_valid_mae = ckpt.best_valid_mae
        return trainer


def train(config: Config, manifest: DatasetManifest, samples, **kwargs):
    """Run ``config.total_steps`` updates. Returns (best-by-valid-MAE
    checkpoint, log records, trainer)."""
    trainer = Trainer(config, manifest, samples, **kwargs)
    trainer.run()
    best = trainer.best if trainer.best is not None else trainer.checkpoint()
    return best, trainer.records, trainer
