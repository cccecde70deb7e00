"""Per-sample trace export (gates and selection weights) for analysis."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataio import split_samples
from ..errors import ContractError
from ..model import run_inference
from .svg import histogram_panel_svg, write_svg

MODALITY_LABELS = ("text", "audio", "visual")


def _check(gates, alpha):
    if gates.size and not (np.all(gates > 0.0) and np.all(gates < 1.0)):
        raise ContractError("gate value outside (0, 1)")
    if alpha.size and np.max(np.abs(alpha.sum(axis=-1) - 1.0)) > 1e-6:
        raise ContractError("selection weights do not sum to 1")


def trace_records(model, manifest, samples, split="test", batch_size=256) -> list[dict]:
    subset = split_samples(manifest, samples, split)
    res = run_inference(model, subset, batch_size)
    _check(res["gates"], res["alpha"])
    return [
        {
            "id": s.id,
            "label": float(s.label),
            "prediction": float(res["prediction"][i]),
            "gates": res["gates"][i].tolist(),
            "alpha": res["alpha"][i].tolist(),
        }
        for i, s in enumerate(subset)
    ]


def gate_plots(records, out_dir, stem="gates") -> list[Path]:
    """One SVG per layer: gate histograms for each modality, split by label sign."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not records or not records[0]["gates"]:
        return []
    gates = np.array([r["gates"] for r in records])  # (N, L, 3)
    labels = np.array([r["label"] for r in records])
    pos, neg = labels >= 0, labels < 0
    paths = []
    for layer in range(gates.shape[1]):
        panels = [
            (name, {"positive": gates[pos, layer, j], "negative": gates[neg, layer, j]})
            for j, name in enumerate(MODALITY_LABELS)
        ]
        svg = histogram_panel_svg(panels, title=f"layer {layer + 1} gate distributions")
        paths.append(write_svg(out_dir / f"{stem}_layer{layer + 1}.svg", svg))
    return paths


def extract_traces(model, manifest, samples, out_path, plot_dir=None, split="test") -> list[dict]:
    records = trace_records(model, manifest, samples, split)
    out_path = Path(out_path)
    with out_path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    if plot_dir is not None:
        gate_plots(records, plot_dir)
    return records
