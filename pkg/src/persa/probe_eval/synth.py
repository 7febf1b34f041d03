"""Synthetic 3-class task standing in for a Speech/Music/Other corpus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..degrade import mix_at_snr, peak_normalize_dbfs
from ..noise_synth import pink_shape, synth_samples
from ..seeding import derive_seed, generator, name_key
from ..tf_pipeline import Waveform

CLASSES = ("tonal", "noiselike", "modulated")
MACHINERY = "machinery"
CLIP_PEAK_DBFS = -3.0

# analog of the three-fold cross-class contamination protocol, with
# tonal ~ Music, modulated ~ Speech, noiselike ~ Other
SYNTH_CONTAMINATION: dict[int, dict[str, str]] = {
    0: {"tonal": "modulated", "modulated": "tonal", "noiselike": MACHINERY},
    1: {"tonal": "noiselike", "modulated": MACHINERY, "noiselike": "tonal"},
    2: {"tonal": MACHINERY, "modulated": "noiselike", "noiselike": "tonal"},
}


@dataclass(frozen=True)
class SynthTaskSpec:
    """Clip counts and recording conditions of the synthetic task.

    With probability ``background_prob`` a clip is "recorded" over a white
    noise floor at an SNR uniform in ``background_snr_db``; the rest are
    clean.  Without any floor the three classes separate on temporal
    statistics alone, which LOG features keep intact under any gain.
    """

    n_per_class: int = 40
    seed: int = 0
    sample_rate_hz: int = 16000
    slice_ms: float = 1000.0
    background_prob: float = 0.9
    background_snr_db: tuple[float, float] = (0.0, 20.0)

    def __post_init__(self):
        if self.n_per_class < 10:
            raise ValueError("n_per_class must be >= 10")
        if not 0.0 <= self.background_prob <= 1.0:
            raise ValueError("background_prob must be in [0, 1]")

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.slice_ms / 1000.0))


def tonal(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    f0 = rng.uniform(120.0, 400.0)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)
    return sum(np.sin(2 * np.pi * h * f0 * t + phases[h - 1]) / h for h in (1, 2, 3))


def noiselike(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    """Pink noise restricted to one octave around a random center in (500, 4000) Hz."""
    center = rng.uniform(500.0, 4000.0)
    x = pink_shape(n, sr, rng.standard_normal(n))
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1.0 / sr)
    spec[(freqs < center / np.sqrt(2)) | (freqs > center * np.sqrt(2))] = 0.0
    return np.fft.irfft(spec, n=n)


def modulated(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    t = np.arange(n) / sr
    rate = rng.uniform(4.0, 16.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    return rng.standard_normal(n) * (1.0 + 0.8 * np.sin(2 * np.pi * rate * t + phase))


def machinery(rng: np.random.Generator, n: int, sr: int) -> np.ndarray:
    """Low harmonic buzz over pink noise, used only as an interference source."""
    t = np.arange(n) / sr
    f0 = rng.uniform(30.0, 60.0)
    phases = rng.uniform(0.0, 2 * np.pi, size=12)
    buzz = sum(np.sin(2 * np.pi * h * f0 * t + phases[h - 1]) / h for h in range(1, 13))
    hiss = pink_shape(n, sr, rng.standard_normal(n))
    return buzz / np.std(buzz) + hiss / np.std(hiss)


GENERATORS = {"tonal": tonal, "noiselike": noiselike, "modulated": modulated, MACHINERY: machinery}


def synth_clip(kind: str, seed: int, spec: SynthTaskSpec) -> Waveform:
    """One clip of ``kind`` at -3 dBFS peak.

    The source uses ``generator(seed)``; the background decision, SNR and
    noise use separate streams derived from ``seed``.
    """
    n, sr = spec.n_samples, spec.sample_rate_hz
    w = Waveform(GENERATORS[kind](generator(seed), n, sr), sr)
    rng = generator(derive_seed(seed, 1))
    if kind in CLASSES and rng.uniform() < spec.background_prob:
        snr = rng.uniform(*spec.background_snr_db)
        floor = synth_samples("white", n, sr, derive_seed(seed, 2))
        w = mix_at_snr(w, Waveform(floor, sr), snr)
    return peak_normalize_dbfs(w, CLIP_PEAK_DBFS)


def synth_dataset(spec: SynthTaskSpec) -> tuple[list[Waveform], np.ndarray]:
    """``n_per_class`` clips per class, class-major order; labels index CLASSES."""
    clips, labels = [], []
    for c, kind in enumerate(CLASSES):
        for k in range(spec.n_per_class):
            clips.append(synth_clip(kind, derive_seed(spec.seed, c, k), spec))
            labels.append(c)
    return clips, np.asarray(labels)


def synth_pool(kind: str, size: int, seed: int, spec: SynthTaskSpec) -> list[Waveform]:
    """Interference clips; drawn from the same generators, never from the test clips."""
    key = CLASSES.index(kind) if kind in CLASSES else len(CLASSES)
    # the "pool" key keeps these seeds apart from synth_dataset's under the same seed
    return [synth_clip(kind, derive_seed(seed, name_key("pool"), key, k), spec) for k in range(size)]
