"""Seeded white and pink noise, in time domain and as TFSamples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .seeding import generator
from .tf_pipeline import MelFilterbank, PipelineConfig, TFSample, Waveform, mel_magnitude

TARGET_RMS = 0.1
PINK_FLOOR_HZ = 20.0


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # "pink" | "white"
    duration_ms: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("pink", "white"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.duration_ms > 0:
            raise ValueError("duration_ms must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _rms_normalize(x: np.ndarray) -> np.ndarray:
    return x * (TARGET_RMS / np.sqrt(np.mean(x * x)))


def pink_shape(n: int, sample_rate: int, white: np.ndarray) -> np.ndarray:
    """Shape white noise so amplitude falls as 1/sqrt(f) above 20 Hz (flat below)."""
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    gain = 1.0 / np.sqrt(np.maximum(freqs, PINK_FLOOR_HZ))
    return np.fft.irfft(np.fft.rfft(white) * gain, n=n)


def synth_samples(kind: str, n_samples: int, sample_rate: int, seed: int) -> np.ndarray:
    white = generator(seed).standard_normal(n_samples)
    if kind == "white":
        return _rms_normalize(white)
    if kind == "pink":
        return _rms_normalize(pink_shape(n_samples, sample_rate, white))
    raise ValueError(f"unknown noise kind {kind!r}")


def synth_noise(spec: NoiseSpec, sample_rate: int) -> Waveform:
    """RMS-0.1 noise waveform fully determined by ``spec.seed``."""
    n = int(round(sample_rate * spec.duration_ms / 1000.0))
    return Waveform(synth_samples(spec.kind, max(n, 1), sample_rate, spec.seed), sample_rate)


def noise_tf(spec: NoiseSpec, cfg: PipelineConfig, fb: MelFilterbank | None = None) -> TFSample:
    if abs(spec.duration_ms - cfg.slice_ms) > 1e-9:
        raise ValueError("noise duration must equal the configured slice length")
    return mel_magnitude(synth_noise(spec, cfg.sample_rate_hz), cfg, fb)


def noise_tf_frames(kind: str, n_frames: int, seed: int, cfg: PipelineConfig,
                    fb: MelFilterbank | None = None) -> TFSample:
    """Noise TFSample with exactly ``n_frames`` frames, for inputs of any length."""
    n = cfg.samples_for_frames(n_frames)
    w = Waveform(synth_samples(kind, n, cfg.sample_rate_hz, seed), cfg.sample_rate_hz)
    return mel_magnitude(w, cfg, fb)
