"""Sentiment regression metrics.

Binning conventions:

* 7-class (range [-3, 3]): clamp to [-3, 3], round half away from zero.
* 3-class (range [-1, 1]): labels are negative / neutral (|y| <= 1e-6) /
  positive; predictions split at -1/3 and +1/3.
* Binary NN: negative (< 0) vs non-negative, all samples.
* Binary NP: negative vs positive, zero-labeled samples excluded; a
  prediction counts as positive when >= 0.
* F1 is the support-weighted mean of per-class F1.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.metrics import f1_score

from ..errors import ContractError

NEUTRAL_TOL = 1e-6


@dataclass
class MetricReport:
    n: int
    mae: float
    corr: float
    corr_defined: bool
    acc2_nn: float
    acc2_np: float
    f1_nn: float
    f1_np: float
    n_np: int
    acc7: float | None = None
    acc3: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def seven_class(x):
    return round_half_away(np.clip(x, -3.0, 3.0)).astype(int)


def three_class_labels(y):
    y = np.asarray(y, dtype=np.float64)
    return np.where(y < -NEUTRAL_TOL, -1, np.where(y > NEUTRAL_TOL, 1, 0))


def three_class_predictions(p):
    p = np.asarray(p, dtype=np.float64)
    return np.where(p < -1.0 / 3.0, -1, np.where(p > 1.0 / 3.0, 1, 0))


def pearson(preds, labels) -> tuple[float, bool]:
    """(r, defined). Constant inputs have no correlation: (0.0, False)."""
    p = np.asarray(preds, dtype=np.float64) - np.mean(preds)
    y = np.asarray(labels, dtype=np.float64) - np.mean(labels)
    denom = np.sqrt(np.sum(p * p) * np.sum(y * y))
    if denom == 0.0 or not np.isfinite(denom):
        return 0.0, False
    return float(np.clip(np.sum(p * y) / denom, -1.0, 1.0)), True


def _binary(pred_pos, label_pos):
    if len(label_pos) == 0:
        return 0.0, 0.0
    acc = float(np.mean(pred_pos == label_pos))
    f1 = float(f1_score(label_pos, pred_pos, average="weighted", zero_division=0))
    return acc, f1


def compute_metrics(preds, labels, score_range=(-3.0, 3.0)) -> MetricReport:
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if preds.shape != labels.shape or preds.size == 0:
        raise ContractError(
            f"metrics need equal nonempty lengths, got {preds.size} and {labels.size}"
        )
    mae = float(np.mean(np.abs(preds - labels)))
    corr, defined = pearson(preds, labels)

    acc2_nn, f1_nn = _binary(preds >= 0, labels >= 0)
    nz = labels != 0
    acc2_np, f1_np = _binary(preds[nz] >= 0, labels[nz] > 0)

    report = MetricReport(
        n=int(preds.size), mae=mae, corr=corr, corr_defined=defined,
        acc2_nn=acc2_nn, acc2_np=acc2_np, f1_nn=f1_nn, f1_np=f1_np, n_np=int(nz.sum()),
    )
    lo, hi = score_range
    if (lo, hi) == (-1.0, 1.0):
        report.acc3 = float(np.mean(three_class_predictions(preds) == three_class_labels(labels)))
    else:
        report.acc7 = float(np.mean(seven_class(preds) == seven_class(labels)))
    return report


def format_report(report: MetricReport, label: str = "") -> str:
    cls = f"Acc-7 {100 * report.acc7:6.2f}" if report.acc7 is not None else f"Acc-3 {100 * report.acc3:6.2f}"
    corr = f"{report.corr:.3f}" + ("" if report.corr_defined else "*")
    head = f"{label:<18}" if label else ""
    return (
        f"{head}MAE {report.mae:.3f}  Corr {corr}  {cls}  "
        f"Acc-2 {100 * report.acc2_nn:.2f}/{100 * report.acc2_np:.2f}  "
        f"F1 {100 * report.f1_nn:.2f}/{100 * report.f1_np:.2f}  (n={report.n})"
    )
