"""Context-agnostic audio front-ends (PERSA, PERSA+ and baselines), dataset
degradation protocols and a desk-scale robustness benchmark."""

from .frontends import FrontEnd, FrontEndConfig, NormalizedSample, SampleContext, apply_frontend
from .tf_pipeline import PipelineConfig, TFSample, Waveform, load_wav, mel_filterbank, mel_magnitude

__version__ = "0.1.0"

__all__ = [
    "FrontEnd", "FrontEndConfig", "NormalizedSample", "PipelineConfig", "SampleContext",
    "TFSample", "Waveform", "apply_frontend", "load_wav", "mel_filterbank", "mel_magnitude",
]
