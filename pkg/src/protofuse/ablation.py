"""Train the full model and each single-component ablation on one seed and
dataset, and lay the results out as a comparison table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ABLATIONS, Config, split_samples
from .evaluation import MetricReport, evaluate
from .model import build_variant, model_from_checkpoint, predict_samples, predicted_parameter_delta
from .trainer import Trainer

VARIANTS = ("full",) + tuple(ABLATIONS)
LABELS = {
    "full": "Full model",
    "no_spb": "w/o prototype bank",
    "no_selection": "w/o selection",
    "no_fine_path": "w/o fine path",
    "no_dmr_gates": "w/o routing gates",
    "no_shared_proto": "w/o shared prototypes",
}


@dataclass
class AblationRow:
    variant: str
    n_params: int
    delta: int
    predicted_delta: int
    steps: int
    train_mse: float
    metrics: MetricReport

    @property
    def delta_ok(self) -> bool:
        return self.delta == self.predicted_delta

    def to_dict(self) -> dict:
        return {
            "kind": "ablation",
            "variant": self.variant,
            "n_params": self.n_params,
            "delta": self.delta,
            "predicted_delta": self.predicted_delta,
            "steps": self.steps,
            "train_mse": self.train_mse,
            **{f"test_{k}": v for k, v in self.metrics.to_dict().items()},
        }


def train_mse(model, samples, batch_size=256) -> float:
    preds = predict_samples(model, samples, batch_size)
    labels = np.array([s.label for s in samples])
    return float(np.mean((preds - labels) ** 2))


def run_ablation(config: Config, manifest, samples, variants=VARIANTS, stop_when=None,
                 on_row=None) -> list[AblationRow]:
    """``stop_when(trainer)`` may end each run early. Evaluation uses the
    best-by-validation checkpoint; train MSE is measured on the final
    weights."""
    base = config.with_variant("full")
    full_count = build_variant(base, manifest.widths).num_parameters()
    train_set = split_samples(manifest, samples, "train")
    rows = []
    for name in variants:
        cfg = base.with_variant(name)
        trainer = Trainer(cfg, manifest, samples)
        trainer.run(stop_when=stop_when)
        best = trainer.best if trainer.best is not None else trainer.checkpoint()
        n = trainer.model.num_parameters()
        row = AblationRow(
            variant=name,
            n_params=n,
            delta=n - full_count,
            predicted_delta=predicted_parameter_delta(base, name),
            steps=trainer.step,
            train_mse=train_mse(trainer.model, train_set, cfg.eval_batch_size),
            metrics=evaluate(model_from_checkpoint(best), manifest, samples,
                             batch_size=cfg.eval_batch_size),
        )
        rows.append(row)
        if on_row is not None:
            on_row(row)
    return rows


def format_table(rows) -> str:
    has7 = any(r.metrics.acc7 is not None for r in rows)
    cls = "Acc-7" if has7 else "Acc-3"
    header = (f"{'Model':<24}{'Params':>9}{'Delta':>8}  {'MAE':>6} {'Corr':>6} {cls:>6}"
              f"  {'Acc-2 (NN/NP)':>14}  {'F1 (NN/NP)':>14}")
    lines = [header, "-" * len(header)]
    for r in rows:
        m = r.metrics
        acc = m.acc7 if has7 else m.acc3
        corr = f"{m.corr:.3f}" + ("" if m.corr_defined else "*")
        lines.append(
            f"{LABELS.get(r.variant, r.variant):<24}{r.n_params:>9}{r.delta:>+8}  "
            f"{m.mae:>6.3f} {corr:>6} {100 * acc:>6.2f}  "
            f"{100 * m.acc2_nn:>6.2f}/{100 * m.acc2_np:<7.2f}  {100 * m.f1_nn:>6.2f}/{100 * m.f1_np:<7.2f}"
        )
    return "\n".join(lines)
