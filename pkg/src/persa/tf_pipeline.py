"""WAV decoding, fixed-length slicing and magnitude mel spectrograms."""

from __future__ import annotations

import os
import tempfile
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class AudioFormatError(ValueError):
    """Raised for WAV files outside the supported mono 16-bit PCM subset."""


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def scaled(self, gain: float) -> Waveform:
        return Waveform(self.samples * gain, self.sample_rate_hz)


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate_hz: int = 16000
    window_len: int = 512
    hop_len: int = 256
    fft_len: int = 512
    mel_bands: int = 64
    slice_ms: float = 1000.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if not (0 < self.hop_len <= self.window_len <= self.fft_len):
            raise ValueError("need 0 < hop_len <= window_len <= fft_len")
        if not (500 <= self.slice_ms <= 5000):
            raise ValueError("slice_ms must lie in [500, 5000]")
        if self.mel_bands < 2:
            raise ValueError("mel_bands must be >= 2")
        if self.slice_samples < self.window_len:
            raise ValueError("slice shorter than one analysis window")

    @property
    def slice_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.slice_ms / 1000.0))

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            return 0
        return (n_samples - self.window_len) // self.hop_len + 1

    def samples_for_frames(self, n_frames: int) -> int:
        """Shortest signal length that yields ``n_frames`` frames."""
        return (n_frames - 1) * self.hop_len + self.window_len

    def to_dict(self) -> dict:
        return {
            "sample_rate_hz": self.sample_rate_hz,
            "window_len": self.window_len,
            "hop_len": self.hop_len,
            "fft_len": self.fft_len,
            "mel_bands": self.mel_bands,
            "slice_ms": self.slice_ms,
            "window": "hann-periodic",
        }


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray  # (M, K)
    center_hz: np.ndarray  # (M,)


@dataclass(frozen=True)
class TFSample:
    """L x M nonnegative magnitude spectrogram (time-major)."""

    values: np.ndarray
    config: PipelineConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 2:
            raise ValueError(f"TFSample must be L x M with L >= 1, M >= 2; got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("TFSample values must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def scaled(self, gain: float) -> TFSample:
        return TFSample(self.values * gain, self.config)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: PipelineConfig) -> MelFilterbank:
    """Triangular mel filters, peak-normalized to 1.

    Band edges are ``mel_bands + 2`` points equally spaced in mel between
    0 Hz and Nyquist; band ``m`` rises from edge ``m`` to its center at edge
    ``m + 1`` and falls to edge ``m + 2``.
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(cfg.sample_rate_hz / 2), cfg.mel_bands + 2))
    bin_hz = np.arange(cfg.n_bins) * cfg.sample_rate_hz / cfg.fft_len
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_hz - lo) / (center - lo)
    falling = (hi - bin_hz) / (hi - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    peaks = weights.max(axis=1)
    if np.any(peaks <= 0):
        empty = np.flatnonzero(peaks <= 0).tolist()
        raise ValueError(
            f"mel bands {empty} contain no FFT bin; reduce mel_bands or raise fft_len"
        )
    return MelFilterbank(weights=weights / peaks[:, None], center_hz=edges[1:-1].copy())


def load_wav(path: str | os.PathLike, cfg: PipelineConfig | None = None) -> Waveform:
    """Decode a mono 16-bit PCM WAV file to full-scale floats (value / 32768).

    Raises:
        AudioFormatError: on any other encoding, channel count, or when the
            header sample rate differs from ``cfg.sample_rate_hz``.
    """
    try:
        with wave.open(str(path), "rb") as fh:
            channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            comptype = fh.getcomptype()
            frames = fh.readframes(fh.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: unsupported encoding ({exc})") from exc
    except EOFError as exc:
        raise AudioFormatError(f"{path}: truncated or empty WAV file") from exc
    if comptype != "NONE" or width != 2:
        raise AudioFormatError(f"{path}: unsupported encoding (need 16-bit PCM, got {8 * width}-bit)")
    if channels != 1:
        raise AudioFormatError(f"{path}: unsupported channel count {channels} (need mono)")
    if cfg is not None and rate != cfg.sample_rate_hz:
        raise AudioFormatError(
            f"{path}: sample rate {rate} Hz does not match configured "
            f"{cfg.sample_rate_hz} Hz (no resampling is performed)"
        )
    pcm = np.frombuffer(frames, dtype="<i2")
    if pcm.size == 0:
        raise AudioFormatError(f"{path}: no audio frames")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")


def write_wav(path: str | os.PathLike, w: Waveform) -> None:
    """Write mono 16-bit PCM atomically (temp file in the same dir, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as raw, wave.open(raw, "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(2)
            fh.setframerate(w.sample_rate_hz)
            fh.writeframes(to_pcm16(w.samples).tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def slice_samples(w: Waveform, cfg: PipelineConfig) -> list[Waveform]:
    """Non-overlapping ``slice_ms`` slices; a short trailing remainder is dropped."""
    if w.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(
            f"waveform rate {w.sample_rate_hz} Hz != configured {cfg.sample_rate_hz} Hz"
        )
    n = cfg.slice_samples
    return [
        Waveform(w.samples[k * n:(k + 1) * n], w.sample_rate_hz)
        for k in range(len(w) // n)
    ]


def _hann(n: int) -> np.ndarray:
    # periodic Hann, the usual STFT choice
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def mel_magnitude(w: Waveform, cfg: PipelineConfig, fb: MelFilterbank | None = None) -> TFSample:
    """Magnitude mel spectrogram: ``sqrt(fb.weights @ |FFT|^2)`` per frame.

    Frames are uncentered Hann-windowed hops, so ``L = (n - window) // hop + 1``.
    The FFT is scaled by ``2 / sum(window)``, which maps a full-scale sinusoid
    on a bin center to a peak bin magnitude of 1; the log floor is therefore
    expressed relative to digital full scale.
    """
    if w.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(
            f"waveform rate {w.sample_rate_hz} Hz != configured {cfg.sample_rate_hz} Hz"
        )
    if len(w) < cfg.window_len:
        raise ValueError(f"need at least {cfg.window_len} samples, got {len(w)}")
    if fb is None:
        fb = mel_filterbank(cfg)
    if fb.weights.shape != (cfg.mel_bands, cfg.n_bins):
        raise ValueError("filterbank shape does not match pipeline config")
    window = _hann(cfg.window_len)
    frames = np.lib.stride_tricks.sliding_window_view(w.samples, cfg.window_len)[:: cfg.hop_len]
    spectrum = np.fft.rfft(frames * window, n=cfg.fft_len, axis=1) * (2.0 / window.sum())
    power = spectrum.real**2 + spectrum.imag**2
    mel_power = power @ fb.weights.T
    return TFSample(np.sqrt(np.maximum(mel_power, 0.0)), cfg)


def featurize_waveform(w: Waveform, cfg: PipelineConfig, fb: MelFilterbank | None = None) -> list[TFSample]:
    fb = fb if fb is not None else mel_filterbank(cfg)
    return [mel_magnitude(s, cfg, fb) for s in slice_samples(w, cfg)]
