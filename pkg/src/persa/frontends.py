"""The six front-end normalizers: LOG, LOG-AU, LOG-T, PERSA, PERSA+ and PCEN.

All functions take a magnitude spectrogram (a :class:`TFSample` or any
L x M array) and return a :class:`NormalizedSample`.  Randomness enters only
through explicit arguments: a fixed gain in dB or a ``numpy`` Generator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from .noise_synth import synth_samples
from .seeding import STREAM_GAIN, STREAM_NOISE, derive_seed, generator
from .tf_pipeline import MelFilterbank, PipelineConfig, TFSample, Waveform, mel_magnitude


# far below the 16-bit quantization floor, so a gain of 0.1 on any real
# spectrogram stays exactly gain-invariant to within 1e-5 after the log
LOG_FLOOR = 1e-12


class SilentSampleError(ValueError):
    """The input carries no energy, so a power-relative operation is undefined."""


class FrontEnd(str, Enum):
    LOG = "log"
    LOG_AU = "log-au"
    LOG_T = "log-t"
    PERSA = "persa"
    PERSA_PLUS = "persa-plus"
    PCEN = "pcen"


@dataclass(frozen=True)
class PCENParams:
    alpha: float = 0.98
    delta: float = 2.0
    r: float = 0.5
    time_constant_s: float = 0.4
    eps: float = 1e-6

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("pcen alpha must be in (0, 1]")
        if not 0 < self.r <= 1:
            raise ValueError("pcen r must be in (0, 1]")
        if self.delta <= 0 or self.time_constant_s <= 0 or self.eps <= 0:
            raise ValueError("pcen delta, time constant and eps must be positive")


@dataclass(frozen=True)
class FrontEndConfig:
    kind: FrontEnd = FrontEnd.PERSA_PLUS
    q_db: float = 9.0
    c_db: float = 30.0
    au_range_db: tuple[float, float] = (-30.0, 30.0)
    persa_plus_gain_db: float = 3.0
    augment: bool = True
    log_floor: float = LOG_FLOOR
    pcen: PCENParams = field(default_factory=PCENParams)

    def __post_init__(self):
        object.__setattr__(self, "kind", FrontEnd(self.kind))
        object.__setattr__(self, "au_range_db", tuple(float(v) for v in self.au_range_db))
        if not (self.q_db > 0):
            raise ValueError("q_db must be positive or +inf")
        if not (self.c_db > 0 and math.isfinite(self.c_db)):
            raise ValueError("c_db must be positive and finite")
        a, b = self.au_range_db
        if not a < b:
            raise ValueError("au_range_db needs a < b")
        if self.persa_plus_gain_db < 0:
            raise ValueError("persa_plus_gain_db is a half-range and must be >= 0")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["q_db"] = "inf" if math.isinf(self.q_db) else self.q_db
        d["au_range_db"] = list(self.au_range_db)
        return d


@dataclass(frozen=True)
class NormalizedSample:
    values: np.ndarray
    kind: FrontEnd
    applied_gain_db: float | None = None

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _mat(S) -> np.ndarray:
    return np.asarray(S, dtype=np.float64)


def _draw_gain(gain_draw, lo: float, hi: float) -> float:
    if gain_draw is None:
        raise ValueError("augmentation needs a gain draw (a float in dB or a Generator)")
    if isinstance(gain_draw, np.random.Generator):
        return float(gain_draw.uniform(lo, hi))
    return float(gain_draw)


def inject_noise(S, N, q_db: float) -> TFSample:
    """Add noise N to S in the power domain at ``q_db`` below S's mean power.

    ``S_n = sqrt(S^2 + N^2 * p_s / (p_n * 10^(q/10)))`` with ``p`` the mean of
    the squared magnitudes over all bins.  ``q_db = inf`` returns S unchanged.
    """
    s, n = _mat(S), _mat(N)
    if s.shape != n.shape:
        raise ValueError(f"signal {s.shape} and noise {n.shape} shapes differ")
    config = getattr(S, "config", None)
    if math.isinf(q_db) and q_db > 0:
        return TFSample(s.copy(), config)
    if not math.isfinite(q_db):
        raise ValueError("q_db must be finite or +inf")
    p_s = np.mean(s * s)
    p_n = np.mean(n * n)
    if p_s == 0:
        raise SilentSampleError("silent sample: signal power is zero")
    if p_n == 0:
        raise ValueError("noise sample is identically zero")
    scale = p_s / (p_n * 10.0 ** (q_db / 10.0))
    return TFSample(np.sqrt(s * s + n * n * scale), config)


def log_compress(S, log_floor: float = LOG_FLOOR) -> np.ndarray:
    return np.log10(_mat(S) + log_floor)


def mean_subtract(X, kind: FrontEnd = FrontEnd.PERSA) -> NormalizedSample:
    x = _mat(X)
    return NormalizedSample(x - x.mean(), FrontEnd(kind))


def persa(S, cfg: FrontEndConfig | None = None) -> NormalizedSample:
    cfg = cfg or FrontEndConfig(kind=FrontEnd.PERSA)
    return mean_subtract(log_compress(S, cfg.log_floor), FrontEnd.PERSA)


def persa_plus(S, N, cfg: FrontEndConfig, gain_draw=None) -> NormalizedSample:
    """Noise injection, log compression, mean subtraction, then optional gain.

    The random gain is added after the mean subtraction as ``g / 20`` in the
    log10-magnitude domain; added earlier it would be cancelled.
    """
    if cfg.kind is not FrontEnd.PERSA_PLUS:
        raise ValueError("persa_plus needs a PERSA_PLUS config")
    out = mean_subtract(log_compress(inject_noise(S, N, cfg.q_db), cfg.log_floor)).values
    gain = None
    if cfg.augment:
        h = cfg.persa_plus_gain_db
        gain = _draw_gain(gain_draw, -h, h)
        out = out + gain / 20.0
    return NormalizedSample(out, FrontEnd.PERSA_PLUS, gain)


def log_frontend(S, cfg: FrontEndConfig | None = None) -> NormalizedSample:
    floor = cfg.log_floor if cfg is not None else LOG_FLOOR
    return NormalizedSample(log_compress(S, floor), FrontEnd.LOG)


def log_au(S, cfg: FrontEndConfig, gain_draw=None) -> NormalizedSample:
    """LOG plus a uniform random gain over ``cfg.au_range_db`` (when augmenting)."""
    out = log_compress(S, cfg.log_floor)
    gain = None
    if cfg.augment:
        gain = _draw_gain(gain_draw, *cfg.au_range_db)
        out = out + gain / 20.0
    return NormalizedSample(out, FrontEnd.LOG_AU, gain)


def dr_floor(c_db: float) -> float:
    """Additive floor that caps ``log10(S/max + floor)`` to a range of exactly ``c_db / 20``.

    Solves ``20 * log10((1 + f) / f) = c``.
    """
    return 1.0 / (10.0 ** (c_db / 20.0) - 1.0)


def log_t(S, cfg: FrontEndConfig | None = None) -> NormalizedSample:
    """Max-normalize, then log-compress against a floor c dB below the peak."""
    c_db = cfg.c_db if cfg is not None else 30.0
    s = _mat(S)
    peak = s.max()
    if not peak > 0:
        raise SilentSampleError("silent sample: LOG-T needs max(S) > 0")
    return NormalizedSample(np.log10(s / peak + dr_floor(c_db)), FrontEnd.LOG_T)


def pcen_smoothing_coef(time_constant_s: float, sample_rate_hz: int, hop_len: int) -> float:
    t_frames = time_constant_s * sample_rate_hz / hop_len
    return (math.sqrt(1.0 + 4.0 * t_frames**2) - 1.0) / (2.0 * t_frames**2)


def pcen_frontend(S, cfg: FrontEndConfig | None = None,
                  pipeline: PipelineConfig | None = None) -> NormalizedSample:
    """Per-channel energy normalization on the power spectrogram ``S**2``.

    The first-order smoother runs along time and starts at the first frame.
    """
    p = (cfg or FrontEndConfig()).pcen
    pipeline = pipeline or getattr(S, "config", None) or PipelineConfig()
    E = _mat(S) ** 2
    b = pcen_smoothing_coef(p.time_constant_s, pipeline.sample_rate_hz, pipeline.hop_len)
    M = np.empty_like(E)
    M[0] = E[0]
    for t in range(1, E.shape[0]):
        M[t] = (1.0 - b) * M[t - 1] + b * E[t]
    out = (E / (p.eps + M) ** p.alpha + p.delta) ** p.r - p.delta**p.r
    return NormalizedSample(out, FrontEnd.PCEN)


@dataclass(frozen=True)
class SampleContext:
    """Where the random draws for one sample come from.

    Noise and gain use separate streams derived from
    ``(master_seed, index[, epoch])``.  Leave ``epoch`` as None to draw one
    realization per sample; set it to redraw each training epoch.
    """

    master_seed: int
    index: int
    epoch: int | None = None

    def _keys(self) -> tuple[int, ...]:
        return (self.index,) if self.epoch is None else (self.index, self.epoch)

    def noise_seed(self) -> int:
        return derive_seed(self.master_seed, *self._keys(), STREAM_NOISE)

    def gain_seed(self) -> int:
        return derive_seed(self.master_seed, *self._keys(), STREAM_GAIN)

    def gain_rng(self) -> np.random.Generator:
        return generator(self.gain_seed())


def matching_noise(S, seed: int, pipeline: PipelineConfig,
                   fb: MelFilterbank | None = None) -> TFSample:
    """Pink-noise TFSample with the same frame count as ``S``.

    When ``S`` has the frame count of a standard slice the noise is a full
    slice, which makes this identical to ``noise_tf`` for sliced input.
    """
    n_frames, n_bands = _mat(S).shape
    if n_bands != pipeline.mel_bands:
        raise ValueError(f"sample has {n_bands} bands, pipeline expects {pipeline.mel_bands}")
    n = pipeline.slice_samples
    if pipeline.n_frames(n) != n_frames:
        n = pipeline.samples_for_frames(n_frames)
    w = Waveform(synth_samples("pink", n, pipeline.sample_rate_hz, seed), pipeline.sample_rate_hz)
    return mel_magnitude(w, pipeline, fb)


def apply_frontend(S, cfg: FrontEndConfig, ctx: SampleContext | None = None, *,
                   pipeline: PipelineConfig | None = None,
                   fb: MelFilterbank | None = None,
                   noise=None) -> NormalizedSample:
    """Dispatch on ``cfg.kind``.

    PERSA+ synthesizes its pink noise from ``ctx`` unless ``noise`` is given;
    LOG-AU and PERSA+ draw their gains from ``ctx`` when augmenting.
    """
    pipeline = pipeline or getattr(S, "config", None) or PipelineConfig()
    kind = cfg.kind
    if kind is FrontEnd.LOG:
        return log_frontend(S, cfg)
    if kind is FrontEnd.LOG_T:
        return log_t(S, cfg)
    if kind is FrontEnd.PERSA:
        return persa(S, cfg)
    if kind is FrontEnd.PCEN:
        return pcen_frontend(S, cfg, pipeline)
    if ctx is None and (cfg.augment or (kind is FrontEnd.PERSA_PLUS and noise is None)):
        raise ValueError(f"{kind.value} needs a SampleContext for its random draws")
    gain_draw = ctx.gain_rng() if ctx is not None else None
    if kind is FrontEnd.LOG_AU:
        return log_au(S, cfg, gain_draw)
    if noise is None:
        noise = matching_noise(S, ctx.noise_seed(), pipeline, fb)
    return persa_plus(S, noise, cfg, gain_draw)


def without_augmentation(cfg: FrontEndConfig) -> FrontEndConfig:
    return replace(cfg, augment=False)
