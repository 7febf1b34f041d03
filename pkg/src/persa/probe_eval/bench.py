"""Robustness benchmark and q-versus-SNR sweep on the synthetic task.

Each repeat ``r`` draws its own train set, test set and interference pools
from ``derive_seed(seed, r)`` and uses contamination fold ``r % 3``.  Probes
always train on clean clips; only the test clips are perturbed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..degrade import DegradationPlan, draw_snr, mix_at_snr, peak_normalize_dbfs
from ..frontends import FrontEnd, FrontEndConfig, SampleContext, apply_frontend, without_augmentation
from ..noise_synth import synth_samples
from ..seeding import GENERATOR, derive_seed, generator
from ..tf_pipeline import PipelineConfig, TFSample, Waveform, mel_filterbank, mel_magnitude
from .probe import ProbeHyper, evaluate, pool_features, train_probe
from .synth import CLASSES, SYNTH_CONTAMINATION, SynthTaskSpec, synth_dataset, synth_pool

SCENARIOS = ("clean", "gain", "noisy", "mixed")
INF = math.inf
DEFAULT_Q_LIST = (3.0, 6.0, 9.0, 12.0, 15.0, INF)
DEFAULT_SNR_LIST = (INF, 15.0, 12.0, 9.0, 6.0, 3.0)
DEFAULT_C_LIST = (12.0, 18.0, 24.0, 30.0, 36.0, 48.0)

# sub-streams of a repeat seed
_TRAIN, _TEST, _GAIN, _POOL, _MIX, _SWEEP_NOISE, _FEAT_TRAIN, _FEAT_TEST = range(8)


@dataclass(frozen=True)
class BenchSettings:
    n_per_class: int = 40
    pool_size: int = 12
    gain_levels_dbfs: tuple[float, ...] = (0.0, -10.0, -20.0, -30.0)
    snr_mean_db: float = 9.0
    snr_std_db: float = 3.0
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    hyper: ProbeHyper = field(default_factory=ProbeHyper)

    def to_dict(self) -> dict:
        return {
            "n_per_class": self.n_per_class,
            "pool_size": self.pool_size,
            "gain_levels_dbfs": list(self.gain_levels_dbfs),
            "snr_mean_db": self.snr_mean_db,
            "snr_std_db": self.snr_std_db,
            "pipeline": self.pipeline.to_dict(),
            "probe": {"lr": self.hyper.lr, "epochs": self.hyper.epochs,
                      "l2": self.hyper.l2, "seed": self.hyper.seed},
        }


@dataclass
class BenchResult:
    frontend: dict
    scenario: str
    accuracies: list[float]
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))

    def to_dict(self) -> dict:
        return {"frontend": self.frontend, "scenario": self.scenario, "seed": self.seed,
                "repeats": len(self.accuracies), "accuracies": self.accuracies,
                "mean": self.mean, "std": self.std, "generator": GENERATOR}


def _fmt_db(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:g}"


@dataclass
class SweepReport:
    q_list: list[float]
    snr_list: list[float]
    mean: np.ndarray  # (|q|, |snr|)
    std: np.ndarray
    c_list: list[float]
    c_mean: list[float]
    c_std: list[float]
    repeats: int
    seed: int
    settings: dict

    def to_dict(self) -> dict:
        return {
            "q_list": [_fmt_db(q) for q in self.q_list],
            "snr_list": [_fmt_db(s) for s in self.snr_list],
            "accuracy_mean": self.mean.tolist(),
            "accuracy_std": self.std.tolist(),
            "logt_c_sweep": {"scenario": "gain", "c_list": [_fmt_db(c) for c in self.c_list],
                             "accuracy_mean": self.c_mean, "accuracy_std": self.c_std},
            "repeats": self.repeats,
            "seed": self.seed,
            "generator": GENERATOR,
            "settings": self.settings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        """Rows q, columns SNR, cells "mean ± std" in percent.

        ``*`` marks cells within one point of their column's best mean.
        """
        def label(v):
            return "∞" if math.isinf(v) else f"{v:g}"

        pct, spct = 100 * self.mean, 100 * self.std
        best = pct.max(axis=0)
        width = 14
        lines = ["PERSA+ probe accuracy (%) by q (rows) and test SNR in dB (columns)",
                 "q \\ SNR".ljust(8) + "".join(label(s).rjust(width) for s in self.snr_list)]
        for i, q in enumerate(self.q_list):
            cells = []
            for j in range(len(self.snr_list)):
                mark = "*" if pct[i, j] >= best[j] - 1.0 else " "
                cells.append(f"{pct[i, j]:5.1f} ± {spct[i, j]:4.1f}{mark}".rjust(width))
            lines.append(label(q).ljust(8) + "".join(cells))
        lines.append("* within 1 point of the column maximum")
        lines.append("")
        lines.append("LOG-T probe accuracy (%) by c on the gain scenario")
        for c, m, s in zip(self.c_list, self.c_mean, self.c_std):
            lines.append(f"c = {label(c):>4} dB   {100 * m:5.1f} ± {100 * s:4.1f}")
        return "\n".join(lines) + "\n"


class _Repeat:
    """Clips and mel spectrograms for one repeat, computed once and cached."""

    def __init__(self, seed: int, r: int, settings: BenchSettings):
        self.seed = derive_seed(seed, r)
        self.fold = r % len(SYNTH_CONTAMINATION)
        self.settings = settings
        self.pipeline = settings.pipeline
        self.fb = mel_filterbank(self.pipeline)
        p = self.pipeline
        self.task = SynthTaskSpec(settings.n_per_class, 0, p.sample_rate_hz, p.slice_ms)
        self._cache: dict = {}

    def _mel(self, clips: list[Waveform]) -> list[TFSample]:
        return [mel_magnitude(w, self.pipeline, self.fb) for w in clips]

    def _clips(self, stream: int):
        key = ("clips", stream)
        if key not in self._cache:
            self._cache[key] = synth_dataset(replace(self.task, seed=derive_seed(self.seed, stream)))
        return self._cache[key]

    def train(self) -> tuple[list[TFSample], np.ndarray]:
        key = ("train_tf",)
        if key not in self._cache:
            clips, y = self._clips(_TRAIN)
            self._cache[key] = (self._mel(clips), y)
        return self._cache[key]

    def _gain_clips(self) -> list[Waveform]:
        clips, _ = self._clips(_TEST)
        rng = generator(derive_seed(self.seed, _GAIN))
        levels = self.settings.gain_levels_dbfs
        return [peak_normalize_dbfs(w, levels[int(rng.integers(len(levels)))]) for w in clips]

    def _noisy_clips(self) -> list[Waveform]:
        clips, y = self._clips(_TEST)
        contamination = SYNTH_CONTAMINATION[self.fold]
        pool_seed = derive_seed(self.seed, _POOL)
        pools = {kind: synth_pool(kind, self.settings.pool_size, pool_seed, self.task)
                 for kind in sorted(set(contamination.values()))}
        plan = DegradationPlan(snr_mean_db=self.settings.snr_mean_db, snr_std_db=self.settings.snr_std_db)
        out = []
        for i, (w, c) in enumerate(zip(clips, y)):
            rng = generator(derive_seed(self.seed, _MIX, i))
            pool = pools[contamination[CLASSES[c]]]
            pick = pool[int(rng.integers(len(pool)))]
            _, snr, _ = draw_snr(rng, plan)
            out.append(mix_at_snr(w, pick, snr))
        return out

    def test(self, scenario: str) -> tuple[list[TFSample], np.ndarray]:
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
        key = ("test_tf", scenario)
        if key not in self._cache:
            clips, y = self._clips(_TEST)
            if scenario == "clean":
                tfs = self._mel(clips)
            elif scenario == "gain":
                tfs = self._mel(self._gain_clips())
            elif scenario == "noisy":
                tfs = self._mel(self._noisy_clips())
            else:
                tfs = self.test("clean")[0] + self.test("noisy")[0]
                y = np.concatenate([y, y])
            self._cache[key] = (tfs, y)
        return self._cache[key]

    def pink_contaminated(self, snr_db: float) -> tuple[list[TFSample], np.ndarray]:
        key = ("pink_tf", snr_db)
        if key not in self._cache:
            clips, y = self._clips(_TEST)
            if math.isinf(snr_db):
                self._cache[key] = self.test("clean")
            else:
                sr = self.pipeline.sample_rate_hz
                mixed = []
                for i, w in enumerate(clips):
                    noise = synth_samples("pink", len(w), sr, derive_seed(self.seed, _SWEEP_NOISE, i))
                    mixed.append(mix_at_snr(w, Waveform(noise, sr), snr_db))
                self._cache[key] = (self._mel(mixed), y)
        return self._cache[key]

    def features(self, tfs: list[TFSample], cfg: FrontEndConfig, stream: int) -> np.ndarray:
        master = derive_seed(self.seed, stream)
        return np.stack([
            pool_features(apply_frontend(S, cfg, SampleContext(master, i), pipeline=self.pipeline, fb=self.fb))
            for i, S in enumerate(tfs)
        ])

    def score(self, cfg: FrontEndConfig, test_tfs: list[TFSample], y_test: np.ndarray) -> float:
        train_tfs, y_train = self.train()
        key = ("model", cfg)
        if key not in self._cache:
            X = self.features(train_tfs, cfg, _FEAT_TRAIN)
            self._cache[key] = train_probe(X, y_train, self.settings.hyper, n_classes=len(CLASSES))
        model = self._cache[key]
        X_test = self.features(test_tfs, without_augmentation(cfg), _FEAT_TEST)
        return evaluate(model, X_test, y_test)


class Workbench:
    """Shares generated clips and trained probes across benchmark and sweep calls."""

    def __init__(self, seed: int = 0, settings: BenchSettings | None = None):
        self.seed = seed
        self.settings = settings or BenchSettings()
        self._repeats: dict[int, _Repeat] = {}

    def repeat(self, r: int) -> _Repeat:
        if r not in self._repeats:
            self._repeats[r] = _Repeat(self.seed, r, self.settings)
        return self._repeats[r]

    def benchmark(self, cfg: FrontEndConfig, scenario: str, repeats: int = 3) -> BenchResult:
        if repeats < 1:
            raise ValueError("repeats must be >= 1")
        accs = []
        for r in range(repeats):
            rep = self.repeat(r)
            tfs, y = rep.test(scenario)
            accs.append(rep.score(cfg, tfs, y))
        return BenchResult(cfg.to_dict(), scenario, accs, self.seed)

    def sweep(self, q_list=DEFAULT_Q_LIST, snr_list=DEFAULT_SNR_LIST, repeats: int = 3,
              c_list=DEFAULT_C_LIST, augment: bool = False) -> SweepReport:
        q_list, snr_list, c_list = list(q_list), list(snr_list), list(c_list)
        if not q_list or not snr_list or repeats < 1:
            raise ValueError("sweep needs non-empty q and SNR lists and repeats >= 1")
        acc = np.zeros((len(q_list), len(snr_list), repeats))
        for r in range(repeats):
            rep = self.repeat(r)
            for i, q in enumerate(q_list):
                cfg = FrontEndConfig(kind=FrontEnd.PERSA_PLUS, q_db=q, augment=augment)
                for j, snr in enumerate(snr_list):
                    tfs, y = rep.pink_contaminated(snr)
                    acc[i, j, r] = rep.score(cfg, tfs, y)
        c_results = [self.benchmark(FrontEndConfig(kind=FrontEnd.LOG_T, c_db=c), "gain", repeats)
                     for c in c_list]
        return SweepReport(q_list, snr_list, acc.mean(axis=2), acc.std(axis=2), c_list,
                           [res.mean for res in c_results], [res.std for res in c_results],
                           repeats, self.seed, {**self.settings.to_dict(), "persa_plus_augment": augment})


def run_benchmark(frontend_cfg: FrontEndConfig, scenario: str, repeats: int = 3, seed: int = 0,
                  settings: BenchSettings | None = None) -> BenchResult:
    return Workbench(seed, settings).benchmark(frontend_cfg, scenario, repeats)


def run_sweep(q_list=DEFAULT_Q_LIST, snr_list=DEFAULT_SNR_LIST, repeats: int = 3, seed: int = 0,
              c_list=DEFAULT_C_LIST, settings: BenchSettings | None = None,
              augment: bool = False) -> SweepReport:
    return Workbench(seed, settings).sweep(q_list, snr_list, repeats, c_list, augment)
