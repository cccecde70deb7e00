"""Dataset format, synthetic generation, batching and run configuration."""

from .batching import Batch, batch_iter, collate
from .config import ABLATIONS, Config, load_config, save_config
from .records import (
    MODALITIES,
    MODALITY_CODES,
    DatasetManifest,
    Sample,
    load_dataset,
    parse_samples,
    save_dataset,
    split_samples,
)
from .synth import SynthSpec, generate_synthetic, load_synth_spec

__all__ = [
    "ABLATIONS",
    "Batch",
    "Config",
    "DatasetManifest",
    "MODALITIES",
    "MODALITY_CODES",
    "Sample",
    "SynthSpec",
    "batch_iter",
    "collate",
    "generate_synthetic",
    "load_config",
    "load_dataset",
    "load_synth_spec",
    "parse_samples",
    "save_config",
    "save_dataset",
    "split_samples",
]
