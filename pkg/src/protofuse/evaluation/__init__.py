"""Metrics, missing-modality evaluation and trace export."""

from .masking import MaskSpec, apply_mask, eval_masked, evaluate
from .metrics import MetricReport, compute_metrics, format_report, pearson, seven_class
from .traces import extract_traces, gate_plots, trace_records

__all__ = [
    "MaskSpec",
    "MetricReport",
    "apply_mask",
    "compute_metrics",
    "eval_masked",
    "evaluate",
    "extract_traces",
    "format_report",
    "gate_plots",
    "pearson",
    "seven_class",
    "trace_records",
]
