"""Dataset degradation: per-(fold, class) peak gains and SNR-controlled contamination.

Manifests are JSON Lines, one object per item::

    {"path": ..., "label": ..., "fold": 0, "source": ..., "ops": [...]}

Relative paths resolve against the manifest's directory.  Every op records
its input file, parameters and seed, so :func:`replay_item` can rebuild the
degraded audio bit-exactly.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import GENERATOR, derive_seed, generator, name_key
from .tf_pipeline import Waveform, load_wav, to_pcm16, write_wav

MACHINERY = "machinery"

# fold index -> {class: interference class}; folds are 0-based
DEFAULT_CONTAMINATION: dict[int, dict[str, str]] = {
    0: {"Music": "Speech", "Speech": "Music", "Other": MACHINERY},
    1: {"Music": "Other", "Speech": MACHINERY, "Other": "Music"},
    2: {"Music": MACHINERY, "Speech": "Other", "Other": "Music"},
}


class SilentAudioError(ValueError):
    pass


@dataclass
class DegradationPlan:
    gain_levels_dbfs: tuple[float, ...] = (0.0, -10.0, -20.0, -30.0)
    snr_mean_db: float = 9.0
    snr_std_db: float = 3.0
    contamination: dict[int, dict[str, str]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_CONTAMINATION.items()}
    )
    folds: int = 3
    seed: int = 0

    def __post_init__(self):
        self.gain_levels_dbfs = tuple(float(g) for g in self.gain_levels_dbfs)
        self.contamination = {int(k): dict(v) for k, v in self.contamination.items()}
        if not self.gain_levels_dbfs:
            raise ValueError("need at least one gain level")
        if any(g > 0 for g in self.gain_levels_dbfs):
            raise ValueError("peak gain levels must be <= 0 dBFS")
        if self.snr_std_db < 0:
            raise ValueError("snr_std_db must be >= 0")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if sorted(self.contamination) != list(range(self.folds)):
            raise ValueError(f"contamination map must cover folds 0..{self.folds - 1}")
        classes = set(next(iter(self.contamination.values())))
        for fold, mapping in self.contamination.items():
            if set(mapping) != classes:
                raise ValueError(f"fold {fold} maps classes {sorted(mapping)}, expected {sorted(classes)}")

    @property
    def snr_bounds(self) -> tuple[float, float]:
        return (self.snr_mean_db - 3 * self.snr_std_db, self.snr_mean_db + 3 * self.snr_std_db)

    def to_dict(self) -> dict:
        return {
            "gain_levels_dbfs": list(self.gain_levels_dbfs),
            "snr_mean_db": self.snr_mean_db,
            "snr_std_db": self.snr_std_db,
            "contamination": {str(k): v for k, v in sorted(self.contamination.items())},
            "folds": self.folds,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DegradationPlan:
        d = dict(d)
        if "contamination" in d:
            d["contamination"] = {int(k): v for k, v in d["contamination"].items()}
        return cls(**d)


@dataclass
class ManifestItem:
    path: str
    label: str
    fold: int
    source: str | None = None
    ops: list[dict] = field(default_factory=list)

    @property
    def origin(self) -> str:
        return self.source if self.source is not None else self.path

    def to_dict(self) -> dict:
        return {"path": self.path, "label": self.label, "fold": self.fold,
                "source": self.source, "ops": self.ops}


@dataclass
class Manifest:
    items: list[ManifestItem]
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, item: ManifestItem) -> Path:
        p = Path(item.path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def folds(self) -> set[int]:
        return {it.fold for it in self.items}

    def __len__(self) -> int:
        return len(self.items)


def read_manifest(path: str | os.PathLike) -> Manifest:
    path = Path(path)
    items = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = {"path", "label", "fold"} - rec.keys()
            if missing:
                raise ValueError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            items.append(ManifestItem(rec["path"], rec["label"], int(rec["fold"]),
                                      rec.get("source"), list(rec.get("ops", []))))
    return Manifest(items, path.parent.resolve())


def write_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(it.to_dict(), sort_keys=True) for it in manifest.items]
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    os.replace(tmp, path)


def power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def peak_normalize_dbfs(w: Waveform, level_dbfs: float) -> Waveform:
    """Scale so that max |sample| = 10^(level/20) (peak-referenced dBFS)."""
    if level_dbfs > 0:
        raise ValueError("peak level must be <= 0 dBFS")
    peak = float(np.max(np.abs(w.samples)))
    if peak == 0:
        raise SilentAudioError("cannot peak-normalize a silent waveform")
    return w.scaled(10.0 ** (level_dbfs / 20.0) / peak)


def fit_length(x: np.ndarray, n: int) -> np.ndarray:
    """Loop or truncate ``x`` to exactly ``n`` samples."""
    return np.resize(np.asarray(x), n)


def snr_gain(signal: np.ndarray, interference: np.ndarray, snr_db: float) -> float:
    """Factor g with 10*log10(P(signal) / P(g * interference)) = snr_db."""
    p_sig, p_int = power(signal), power(interference)
    if p_sig == 0:
        raise SilentAudioError("signal is silent")
    if p_int == 0:
        raise SilentAudioError("interference is silent")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return math.sqrt(p_sig / (p_int * 10.0 ** (snr_db / 10.0)))


def mix_at_snr(signal: Waveform, interference: Waveform, snr_db: float) -> Waveform:
    if signal.sample_rate_hz != interference.sample_rate_hz:
        raise ValueError("signal and interference sample rates differ")
    noise = fit_length(interference.samples, len(signal))
    g = snr_gain(signal.samples, noise, snr_db)
    if g == 0.0:
        return Waveform(signal.samples.copy(), signal.sample_rate_hz)
    return Waveform(signal.samples + g * noise, signal.sample_rate_hz)


def measured_snr_db(signal: np.ndarray, scaled_interference: np.ndarray) -> float:
    return 10.0 * math.log10(power(signal) / power(scaled_interference))


def gain_table(pairs, plan: DegradationPlan) -> dict[tuple[int, str], dict]:
    """One seeded level draw per (fold, class) pair."""
    table = {}
    for fold, label in sorted(set(pairs)):
        seed = derive_seed(plan.seed, fold, name_key(label))
        level = plan.gain_levels_dbfs[int(generator(seed).integers(len(plan.gain_levels_dbfs)))]
        table[(fold, label)] = {"fold": fold, "label": label, "level_dbfs": level, "seed": seed}
    return table


def _check_items(manifest: Manifest, plan: DegradationPlan) -> None:
    for i, it in enumerate(manifest.items):
        if it.label is None or it.label == "":
            raise ValueError(f"item {i} ({it.path}) has no class label")
        if not 0 <= it.fold < plan.folds:
            raise ValueError(f"item {i} ({it.path}) has fold {it.fold} outside [0, {plan.folds})")


def _origin(manifest: Manifest, item: ManifestItem) -> str:
    return item.source if item.source is not None else str(manifest.resolve(item).resolve())


def _out_name(index: int, item: ManifestItem) -> str:
    return f"fold{item.fold}/{item.label}/{index:05d}_{Path(item.path).stem}.wav"


def _quantize(w: Waveform) -> Waveform:
    return Waveform(to_pcm16(w.samples).astype(np.float64) / 32768.0, w.sample_rate_hz)


def build_v3(manifest_in: Manifest, plan: DegradationPlan, out_dir: str | os.PathLike) -> Manifest:
    """Peak-normalize every (fold, class) group to one randomly drawn level."""
    _check_items(manifest_in, plan)
    out_dir = Path(out_dir)
    table = gain_table(((it.fold, it.label) for it in manifest_in.items), plan)
    items = []
    for i, it in enumerate(manifest_in.items):
        src = manifest_in.resolve(it)
        draw = table[(it.fold, it.label)]
        w = peak_normalize_dbfs(load_wav(src), draw["level_dbfs"])
        rel = _out_name(i, it)
        write_wav(out_dir / rel, w)
        op = {"op": "peak_normalize", "input": str(src.resolve()),
              "level_dbfs": draw["level_dbfs"], "seed": draw["seed"], "generator": GENERATOR}
        items.append(ManifestItem(rel, it.label, it.fold, _origin(manifest_in, it), it.ops + [op]))
    return Manifest(items, out_dir.resolve())


def list_pool(directory: str | os.PathLike) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".wav")


def draw_snr(rng: np.random.Generator, plan: DegradationPlan) -> tuple[float, float, bool]:
    """Normal(mean, std) draw clamped to mean +- 3 std; returns (raw, used, clamped)."""
    raw = float(rng.normal(plan.snr_mean_db, plan.snr_std_db))
    lo, hi = plan.snr_bounds
    used = min(max(raw, lo), hi)
    return raw, used, used != raw


def _apply_mix(w: Waveform, interference: Waveform, snr_db: float) -> tuple[Waveform, float, float]:
    noise = fit_length(interference.samples, len(w))
    g = snr_gain(w.samples, noise, snr_db)
    mixed = w.samples + g * noise
    # keep the 16-bit file unclipped; a common scale leaves the SNR untouched
    peak = float(np.max(np.abs(mixed)))
    post = 1.0 if peak <= 32767 / 32768 else (32767 / 32768) / peak
    return Waveform(mixed * post, w.sample_rate_hz), g, post


def build_v4(manifest_in: Manifest, plan: DegradationPlan,
             interference_pools: dict[str, str | os.PathLike],
             out_dir: str | os.PathLike) -> Manifest:
    """Contaminate each item with a seeded pick from its fold's interference pool."""
    _check_items(manifest_in, plan)
    out_dir = Path(out_dir)
    pools: dict[str, list[Path]] = {}
    needed = sorted({plan.contamination[it.fold].get(it.label, "") for it in manifest_in.items})
    for cls in needed:
        if cls == "":
            bad = next(it for it in manifest_in.items if it.label not in plan.contamination[it.fold])
            raise ValueError(f"class {bad.label!r} has no interference source in fold {bad.fold}")
        if cls not in interference_pools:
            raise ValueError(f"no interference pool given for class {cls!r}")
        files = list_pool(interference_pools[cls])
        if not files:
            raise ValueError(f"interference pool for class {cls!r} is empty")
        pools[cls] = files

    items = []
    for i, it in enumerate(manifest_in.items):
        src = manifest_in.resolve(it)
        cls = plan.contamination[it.fold][it.label]
        seed = derive_seed(plan.seed, i)
        rng = generator(seed)
        pick = pools[cls][int(rng.integers(len(pools[cls])))]
        raw, snr, clamped = draw_snr(rng, plan)
        w = load_wav(src)
        mixed, g, post = _apply_mix(w, load_wav(pick), snr)
        rel = _out_name(i, it)
        write_wav(out_dir / rel, mixed)
        op = {"op": "mix", "input": str(src.resolve()), "interference": str(pick.resolve()),
              "interference_class": cls, "snr_raw_db": raw, "snr_db": snr, "clamped": clamped,
              "interference_gain": g, "post_scale": post, "seed": seed, "generator": GENERATOR}
        items.append(ManifestItem(rel, it.label, it.fold, _origin(manifest_in, it), it.ops + [op]))
    return Manifest(items, out_dir.resolve())


def _replay_op(op: dict, w: Waveform) -> Waveform:
    if op["op"] == "peak_normalize":
        return peak_normalize_dbfs(w, op["level_dbfs"])
    if op["op"] == "mix":
        mixed, _, _ = _apply_mix(w, load_wav(op["interference"]), op["snr_db"])
        return mixed
    raise ValueError(f"unknown op {op['op']!r}")


def replay_item(item: ManifestItem) -> Waveform:
    """Rebuild an item's audio from its op log; equals the written file's samples.

    Each op logs the file it read, so the last op alone determines the output;
    earlier ops are replayed too, which re-checks the whole chain.
    """
    if not item.ops:
        raise ValueError("item has no logged ops")
    w = None
    for op in item.ops:
        w = _quantize(_replay_op(op, load_wav(op["input"])))
    return w


@dataclass
class EvalSplit:
    train: Manifest
    test: Manifest


def assemble_eval(train_src: Manifest, test_src: Manifest, test_fold: int) -> EvalSplit:
    """Train on ``train_src`` minus ``test_fold``; test on that fold of ``test_src``."""
    return assemble_mixed(train_src, [test_src], test_fold)


def assemble_mixed(train_src: Manifest, test_srcs: list[Manifest], test_fold: int) -> EvalSplit:
    """Like :func:`assemble_eval`, with the test set the union over several variants."""
    for src in test_srcs:
        if src.folds != train_src.folds:
            raise ValueError(f"fold mismatch: train folds {sorted(train_src.folds)} "
                             f"vs test folds {sorted(src.folds)}")
    if test_fold not in train_src.folds:
        raise ValueError(f"test fold {test_fold} not present")
    train = [it for it in train_src.items if it.fold != test_fold]
    test_items = []
    for src in test_srcs:
        for it in src.items:
            if it.fold == test_fold:
                p = src.resolve(it)
                test_items.append(ManifestItem(str(p), it.label, it.fold, _origin(src, it), it.ops))
    train_items = [ManifestItem(str(train_src.resolve(it)), it.label, it.fold,
                                _origin(train_src, it), it.ops) for it in train]
    overlap = {it.origin for it in train_items} & {it.origin for it in test_items}
    if overlap:
        raise ValueError(f"train and test share {len(overlap)} source recordings, e.g. {sorted(overlap)[0]}")
    return EvalSplit(Manifest(train_items, train_src.base_dir), Manifest(test_items, train_src.base_dir))
