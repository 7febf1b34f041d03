"""Desk-scale evaluation: synthetic task, linear probe, benchmark and sweep."""

from .bench import (
    DEFAULT_C_LIST,
    DEFAULT_Q_LIST,
    DEFAULT_SNR_LIST,
    SCENARIOS,
    BenchResult,
    BenchSettings,
    SweepReport,
    Workbench,
    run_benchmark,
    run_sweep,
)
from .probe import ProbeHyper, ProbeModel, evaluate, loss_and_grad, pool_features, train_probe
from .synth import CLASSES, SYNTH_CONTAMINATION, SynthTaskSpec, synth_dataset

__all__ = [
    "BenchResult", "BenchSettings", "CLASSES", "DEFAULT_C_LIST", "DEFAULT_Q_LIST",
    "DEFAULT_SNR_LIST", "ProbeHyper", "ProbeModel", "SCENARIOS", "SYNTH_CONTAMINATION",
    "SweepReport", "SynthTaskSpec", "Workbench", "evaluate", "loss_and_grad",
    "pool_features", "run_benchmark", "run_sweep", "synth_dataset", "train_probe",
]
