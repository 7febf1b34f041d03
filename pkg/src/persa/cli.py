"""Command-line entry point: ``persa {featurize,degrade,bench,sweep}``.

Exit status: 0 on success, 1 if some input files failed, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .degrade import DegradationPlan, build_v3, build_v4, gain_table, read_manifest, write_manifest
from .featfile import atomic_write, write_features
from .frontends import FrontEnd, FrontEndConfig, SampleContext, apply_frontend
from .probe_eval import BenchSettings, Workbench
from .seeding import GENERATOR, derive_seed, name_key
from .tf_pipeline import AudioFormatError, PipelineConfig, featurize_waveform, load_wav, mel_filterbank

log = logging.getLogger("persa")

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_db(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "∞"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a dB value: {text!r}") from None


def parse_db_list(text: str) -> list[float]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty list")
    return [parse_db(p) for p in parts]


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def parse_seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def default_seed() -> int:
    env = os.environ.get("PERSA_SEED")
    return parse_seed(env) if env else 0


def _frontend_config(args) -> FrontEndConfig:
    try:
        return FrontEndConfig(kind=FrontEnd(args.frontend), q_db=args.q, c_db=args.c, augment=args.augment)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _pipeline_config(args) -> PipelineConfig:
    try:
        return PipelineConfig(sample_rate_hz=args.sample_rate, slice_ms=args.slice_ms, mel_bands=args.mel_bands)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _input_files(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    if path.is_dir():
        return sorted(p for p in path.rglob("*") if p.is_file() and p.suffix.lower() == ".wav")
    raise UsageError(f"input not found: {path}")


def cmd_featurize(args) -> int:
    pipeline = _pipeline_config(args)
    cfg = _frontend_config(args)
    root = Path(args.input)
    files = _input_files(root)
    if not files:
        raise UsageError(f"no .wav files under {root}")
    fb = mel_filterbank(pipeline)
    out = Path(args.out)

    def run(path: Path) -> bool:
        rel = path.name if root.is_file() else path.relative_to(root).as_posix()
        master = derive_seed(args.seed, name_key(rel))
        try:
            slices = featurize_waveform(load_wav(path, pipeline), pipeline, fb)
        except (OSError, AudioFormatError) as exc:
            log.error("%s: %s", path, exc)
            return False
        if not slices:
            log.warning("%s: shorter than one %g ms slice, nothing written", path, pipeline.slice_ms)
        stem = rel[: -len(path.suffix)] if path.suffix else rel
        for k, S in enumerate(slices):
            ctx = SampleContext(master, k)
            try:
                x = apply_frontend(S, cfg, ctx, pipeline=pipeline, fb=fb)
            except ValueError as exc:
                log.error("%s slice %d: %s", path, k, exc)
                return False
            meta = {
                "pipeline": pipeline.to_dict(),
                "frontend": cfg.to_dict(),
                "seed": args.seed,
                "sample_seed": master,
                "slice_index": k,
                "noise_seed": ctx.noise_seed() if cfg.kind is FrontEnd.PERSA_PLUS else None,
                "gain_seed": ctx.gain_seed() if cfg.augment and cfg.kind in (FrontEnd.LOG_AU, FrontEnd.PERSA_PLUS) else None,
                "applied_gain_db": x.applied_gain_db,
                "source": str(path),
                "generator": GENERATOR,
                "version": __version__,
            }
            write_features(out / f"{stem}_s{k:03d}.psaf", x.values, meta)
        log.info("%s: %d slices", path, len(slices))
        return True

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(run, files))
    return EXIT_OK if all(results) else EXIT_PARTIAL


def _load_plan(args) -> DegradationPlan:
    try:
        base = json.loads(Path(args.plan).read_text()) if args.plan else {}
    except OSError as exc:
        raise UsageError(f"cannot read plan: {exc}") from None
    if getattr(args, "levels", None) is not None:
        base["gain_levels_dbfs"] = args.levels
    if getattr(args, "snr_mean", None) is not None:
        base["snr_mean_db"] = args.snr_mean
    if getattr(args, "snr_std", None) is not None:
        base["snr_std_db"] = args.snr_std
    base["seed"] = args.seed
    try:
        return DegradationPlan.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid plan: {exc}") from None


def cmd_degrade(args) -> int:
    plan = _load_plan(args)
    if not Path(args.manifest).is_file():
        raise UsageError(f"manifest not found: {args.manifest}")
    try:
        manifest = read_manifest(args.manifest)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad manifest: {exc}") from None
    out = Path(args.out)
    meta = {"plan": plan.to_dict(), "input_manifest": str(args.manifest), "generator": GENERATOR,
            "version": __version__}
    try:
        result = _run_degrade(args, manifest, plan, out, meta)
    except (OSError, AudioFormatError) as exc:
        log.error("%s", exc)
        return EXIT_PARTIAL
    write_manifest(result, out / "manifest.jsonl")
    atomic_write(out / "degrade.json", (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode())
    log.info("wrote %d items to %s", len(result), out)
    return EXIT_OK


def _run_degrade(args, manifest, plan, out, meta):
    if args.mode == "gain":
        table = gain_table(((it.fold, it.label) for it in manifest.items), plan)
        meta["gain_draws"] = list(table.values())
        return build_v3(manifest, plan, out)
    else:
        pools = {}
        for spec in args.pools or []:
            cls, sep, directory = spec.partition("=")
            if not sep or not cls or not directory:
                raise UsageError(f"--pools entries look like CLASS=DIR, got {spec!r}")
            if not Path(directory).is_dir():
                raise UsageError(f"pool directory not found: {directory}")
            pools[cls] = directory
        try:
            result = build_v4(manifest, plan, pools, out)
        except ValueError as exc:
            if "pool" in str(exc):
                raise UsageError(str(exc)) from None
            raise
        meta["pools"] = dict(sorted(pools.items()))
        return result


def _settings(args) -> BenchSettings:
    try:
        return BenchSettings(n_per_class=args.n_per_class)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bench(args) -> int:
    cfg = _frontend_config(args)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    wb = Workbench(args.seed, _settings(args))
    result = wb.benchmark(cfg, args.scenario, args.repeats)
    doc = {**result.to_dict(), "settings": wb.settings.to_dict(), "version": __version__}
    out = Path(args.out)
    name = f"bench_{cfg.kind.value}_{args.scenario}"
    atomic_write(out / f"{name}.json", (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
    text = (f"{cfg.kind.value} / {args.scenario}: {100 * result.mean:.1f} ± {100 * result.std:.1f} % "
            f"over {len(result.accuracies)} repeats "
            f"({', '.join(f'{100 * a:.1f}' for a in result.accuracies)})\n")
    atomic_write(out / f"{name}.txt", text.encode())
    print(text, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if any(not (q > 0) for q in args.q_list):
        raise UsageError("every q must be positive or inf")
    if any(math.isnan(s) for s in args.snr_list):
        raise UsageError("invalid SNR value")
    if any(not (0 < c < math.inf) for c in args.c_list):
        raise UsageError("every c must be positive and finite")
    wb = Workbench(args.seed, _settings(args))
    report = wb.sweep(args.q_list, args.snr_list, args.repeats, args.c_list, args.augment)
    out = Path(args.out)
    atomic_write(out / "sweep.json", report.to_json().encode())
    table = report.to_table()
    atomic_write(out / "sweep.txt", table.encode())
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="persa", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"persa {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def seed_arg(sp):
        sp.add_argument("--seed", type=parse_seed, default=None,
                        help="master seed (default: $PERSA_SEED or 0)")

    def frontend_args(sp, default_augment=True):
        sp.add_argument("--frontend", required=True, choices=[k.value for k in FrontEnd])
        sp.add_argument("--q", type=parse_db, default=9.0, help="PERSA+ noise level in dB, or inf")
        sp.add_argument("--c", type=float, default=30.0, help="LOG-T dynamic range in dB")
        sp.add_argument("--augment", type=parse_bool, default=default_augment,
                        help="random gains for log-au / persa-plus")

    f = sub.add_parser("featurize", help="audio -> PSAF feature files")
    f.add_argument("--input", required=True)
    f.add_argument("--out", required=True)
    frontend_args(f)
    seed_arg(f)
    f.add_argument("--jobs", type=int, default=1)
    f.add_argument("--sample-rate", type=int, default=16000)
    f.add_argument("--slice-ms", type=float, default=1000.0)
    f.add_argument("--mel-bands", type=int, default=64)
    f.set_defaults(func=cmd_featurize)

    d = sub.add_parser("degrade", help="build degraded dataset copies")
    dsub = d.add_subparsers(dest="mode", required=True)
    for mode, helptext in (("gain", "random peak gain per (fold, class)"),
                           ("mix", "cross-class contamination at a random SNR")):
        m = dsub.add_parser(mode, help=helptext)
        m.add_argument("--manifest", required=True)
        m.add_argument("--plan", help="JSON degradation plan; flags override its fields")
        m.add_argument("--out", required=True)
        seed_arg(m)
        if mode == "gain":
            m.add_argument("--levels", type=parse_db_list, help="comma-separated peak levels in dBFS")
        else:
            m.add_argument("--pools", nargs="+", metavar="CLASS=DIR", required=True)
            m.add_argument("--snr-mean", type=float)
            m.add_argument("--snr-std", type=float)
        m.set_defaults(func=cmd_degrade)

    b = sub.add_parser("bench", help="probe accuracy of one front-end in one scenario")
    frontend_args(b)
    b.add_argument("--scenario", required=True, choices=["clean", "gain", "noisy", "mixed"])
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--n-per-class", type=int, default=40)
    b.add_argument("--out", required=True)
    seed_arg(b)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="PERSA+ q x SNR grid and LOG-T c sweep")
    s.add_argument("--q-list", type=parse_db_list, default=[3.0, 6.0, 9.0, 12.0, 15.0, math.inf])
    s.add_argument("--snr-list", type=parse_db_list, default=[math.inf, 15.0, 12.0, 9.0, 6.0, 3.0])
    s.add_argument("--c-list", type=parse_db_list, default=[12.0, 18.0, 24.0, 30.0, 36.0, 48.0])
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--n-per-class", type=int, default=40)
    s.add_argument("--augment", type=parse_bool, default=False, help="PERSA+ training gains")
    s.add_argument("--out", required=True)
    seed_arg(s)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = default_seed()
    except argparse.ArgumentTypeError as exc:
        parser.error(f"PERSA_SEED: {exc}")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"persa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
