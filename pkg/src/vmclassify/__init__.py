"""vmclassify: VM behavior classification from resource-usage time series.

Two small 1D-CNN classifiers — a time-domain variant and a twin that first
maps each metric stream to its magnitude spectrum — plus the complete data
pipeline, training protocol, and a synthetic trace generator, all built on
a from-scratch float64 layer engine with hand-derived backward passes.
"""

from .data import (
    CANONICAL_METRICS,
    CLASS_NAMES,
    DatasetSplit,
    Normalizer,
    VmTrace,
    WindowSample,
    balance_and_split,
    fit_normalizer,
    ingest_csv,
    prepare_dataset,
    window_trace,
)
from .model import ModelSpec, Network, block_count, build
from .nn import Tensor
from .synth import SynthConfig, default_config, synthesize
from .training import (
    EvalReport,
    PlateauScheduler,
    TrainConfig,
    TrainResult,
    evaluate,
    sweep,
    train,
)
from .weights import load, load_network, save

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_METRICS",
    "CLASS_NAMES",
    "DatasetSplit",
    "EvalReport",
    "ModelSpec",
    "Network",
    "Normalizer",
    "PlateauScheduler",
    "SynthConfig",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "VmTrace",
    "WindowSample",
    "balance_and_split",
    "block_count",
    "build",
    "default_config",
    "evaluate",
    "fit_normalizer",
    "ingest_csv",
    "load",
    "load_network",
    "prepare_dataset",
    "save",
    "sweep",
    "synthesize",
    "train",
    "window_trace",
]
