import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from persa.degrade import (
    DEFAULT_CONTAMINATION,
    DegradationPlan,
    Manifest,
    ManifestItem,
    SilentAudioError,
    assemble_eval,
    assemble_mixed,
    build_v3,
    build_v4,
    draw_snr,
    fit_length,
    gain_table,
    measured_snr_db,
    mix_at_snr,
    peak_normalize_dbfs,
    read_manifest,
    replay_item,
    snr_gain,
    write_manifest,
)
from persa.seeding import generator
from persa.tf_pipeline import Waveform, load_wav, write_wav

CLASSES = ("Music", "Speech", "Other")


def _clip(seed, n=8000, amp=0.5):
    x = generator(seed).standard_normal(n)
    return Waveform(amp * x / np.max(np.abs(x)), 16000)


@pytest.fixture
def corpus(tmp_path):
    """3 folds x 3 classes x 2 clips plus one small pool per interference class."""
    src = tmp_path / "src"
    items = []
    for fold in range(3):
        for c, label in enumerate(CLASSES):
            for k in range(2):
                rel = f"{label}/f{fold}_{k}.wav"
                write_wav(src / rel, _clip(100 * fold + 10 * c + k, amp=0.2 + 0.1 * k))
                items.append(ManifestItem(rel, label, fold))
    write_manifest(Manifest(items, src), src / "manifest.jsonl")
    pools = {}
    for c, cls in enumerate(CLASSES + ("machinery",)):
        d = tmp_path / "pools" / cls
        for k in range(3):
            write_wav(d / f"{cls}_{k}.wav", _clip(1000 + 10 * c + k, n=5000 + 1000 * k, amp=0.3))
        pools[cls] = str(d)
    return read_manifest(src / "manifest.jsonl"), pools


class TestPeakNormalize:
    @pytest.mark.parametrize("level, peak", [(0, 1.0), (-20, 0.1), (-30, 10**-1.5)])
    def test_levels(self, level, peak):
        w = peak_normalize_dbfs(_clip(1), level)
        assert np.max(np.abs(w.samples)) == pytest.approx(peak, rel=1e-12)

    def test_silent(self):
        with pytest.raises(SilentAudioError):
            peak_normalize_dbfs(Waveform(np.zeros(10), 16000), -10)


class TestMix:
    def test_equal_power_unit_gain(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        assert snr_gain(x, -x, 0.0) == pytest.approx(1.0)

    def test_infinite_snr(self):
        s = _clip(1)
        out = mix_at_snr(s, _clip(2), math.inf)
        assert np.array_equal(out.samples, s.samples)

    def test_hand_evaluated_gain(self):
        sig = np.full(100, 2.0)  # power 4
        itf = np.ones(100)  # power 1
        assert snr_gain(sig, itf, 10.0) == pytest.approx(math.sqrt(0.4), abs=1e-12)

    def test_silent(self):
        with pytest.raises(SilentAudioError):
            snr_gain(np.zeros(5), np.ones(5), 0)
        with pytest.raises(SilentAudioError):
            snr_gain(np.ones(5), np.zeros(5), 0)

    def test_fit_length_loops(self):
        np.testing.assert_array_equal(fit_length(np.array([1, 2, 3]), 7), [1, 2, 3, 1, 2, 3, 1])
        np.testing.assert_array_equal(fit_length(np.array([1, 2, 3]), 2), [1, 2])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32), st.integers(0, 2**32), st.floats(-20, 40), st.integers(100, 3000))
    def test_measured_snr_matches(self, s1, s2, snr, n_int):
        sig = _clip(s1, n=2000)
        itf = _clip(s2, n=n_int, amp=0.9)
        out = mix_at_snr(sig, itf, snr)
        assert measured_snr_db(sig.samples, out.samples - sig.samples) == pytest.approx(snr, abs=0.01)


class TestPlan:
    def test_defaults(self):
        p = DegradationPlan()
        assert p.gain_levels_dbfs == (0.0, -10.0, -20.0, -30.0)
        assert (p.snr_mean_db, p.snr_std_db, p.folds) == (9.0, 3.0, 3)
        assert p.contamination[0]["Music"] == "Speech"
        assert p.contamination[1]["Speech"] == "machinery"
        assert p.contamination[2]["Music"] == "machinery"

    def test_round_trip(self):
        p = DegradationPlan(seed=4, snr_std_db=0)
        assert DegradationPlan.from_dict(json.loads(json.dumps(p.to_dict()))) == p

    @pytest.mark.parametrize("kwargs", [
        {"gain_levels_dbfs": ()}, {"gain_levels_dbfs": (3.0,)}, {"snr_std_db": -1},
        {"folds": 2}, {"contamination": {0: {"a": "b"}, 1: {"c": "d"}, 2: {"a": "b"}}},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DegradationPlan(**kwargs)

    def test_snr_draws_clamped(self):
        plan = DegradationPlan()
        draws = [draw_snr(generator(k), plan) for k in range(2000)]
        assert all(0.0 <= used <= 18.0 for _, used, _ in draws)
        assert all(c == (raw != used) for raw, used, c in draws)


class TestV3:
    def test_single_level_is_plain_normalization(self, corpus, tmp_path):
        manifest, _ = corpus
        out = build_v3(manifest, DegradationPlan(gain_levels_dbfs=(0.0,)), tmp_path / "v3")
        for src, it in zip(manifest.items, out.items):
            expected = peak_normalize_dbfs(load_wav(manifest.resolve(src)), 0.0)
            got = load_wav(out.resolve(it))
            np.testing.assert_allclose(got.samples, expected.samples, atol=1 / 32768)
            assert it.ops[-1]["level_dbfs"] == 0.0

    def test_gain_table_shape_and_determinism(self, corpus):
        manifest, _ = corpus
        pairs = [(it.fold, it.label) for it in manifest.items]
        a = gain_table(pairs, DegradationPlan(seed=3))
        assert len(a) == 9
        assert a == gain_table(pairs, DegradationPlan(seed=3))
        assert all(d["level_dbfs"] in (0.0, -10.0, -20.0, -30.0) for d in a.values())

    def test_groups_share_a_level(self, corpus, tmp_path):
        manifest, _ = corpus
        out = build_v3(manifest, DegradationPlan(seed=1), tmp_path / "v3")
        for it in out.items:
            peak = np.max(np.abs(load_wav(out.resolve(it)).samples))
            assert 20 * math.log10(peak) == pytest.approx(it.ops[-1]["level_dbfs"], abs=0.01)

    def test_deterministic_and_replayable(self, corpus, tmp_path):
        manifest, _ = corpus
        a = build_v3(manifest, DegradationPlan(seed=5), tmp_path / "a")
        b = build_v3(manifest, DegradationPlan(seed=5), tmp_path / "b")
        assert [it.ops for it in a.items] == [it.ops for it in b.items]
        for it in a.items:
            assert (tmp_path / "a" / it.path).read_bytes() == (tmp_path / "b" / it.path).read_bytes()
            np.testing.assert_array_equal(replay_item(it).samples, load_wav(a.resolve(it)).samples)

    def test_bad_fold(self, tmp_path):
        m = Manifest([ManifestItem("x.wav", "Music", 7)], tmp_path)
        with pytest.raises(ValueError, match="fold"):
            build_v3(m, DegradationPlan(), tmp_path / "o")


class TestV4:
    def test_zero_std_hits_the_mean(self, corpus, tmp_path):
        manifest, pools = corpus
        out = build_v4(manifest, DegradationPlan(snr_std_db=0.0), pools, tmp_path / "v4")
        for src, it in zip(manifest.items, out.items):
            op = it.ops[-1]
            assert op["snr_db"] == 9.0
            sig = load_wav(manifest.resolve(src)).samples * op["post_scale"]
            mixed = load_wav(out.resolve(it)).samples
            assert measured_snr_db(sig, mixed - sig) == pytest.approx(9.0, abs=0.01)

    def test_contamination_follows_the_map(self, corpus, tmp_path):
        manifest, pools = corpus
        out = build_v4(manifest, DegradationPlan(), pools, tmp_path / "v4")
        for it in out.items:
            expected = DEFAULT_CONTAMINATION[it.fold][it.label]
            assert it.ops[-1]["interference_class"] == expected
            assert f"/pools/{expected}/" in it.ops[-1]["interference"]
        music0 = [it for it in out.items if it.fold == 0 and it.label == "Music"]
        assert music0 and all(it.ops[-1]["interference_class"] == "Speech" for it in music0)

    def test_deterministic_and_replayable(self, corpus, tmp_path):
        manifest, pools = corpus
        a = build_v4(manifest, DegradationPlan(seed=2), pools, tmp_path / "a")
        b = build_v4(manifest, DegradationPlan(seed=2), pools, tmp_path / "b")
        for x, y in zip(a.items, b.items):
            assert {k: v for k, v in x.ops[-1].items()} == y.ops[-1]
            assert (tmp_path / "a" / x.path).read_bytes() == (tmp_path / "b" / y.path).read_bytes()
            np.testing.assert_array_equal(replay_item(x).samples, load_wav(a.resolve(x)).samples)

    def test_no_clipping(self, corpus, tmp_path):
        manifest, pools = corpus
        out = build_v4(manifest, DegradationPlan(snr_mean_db=-10, snr_std_db=0), pools, tmp_path / "v4")
        for it in out.items:
            assert np.max(np.abs(load_wav(out.resolve(it)).samples)) <= 32767 / 32768
            assert it.ops[-1]["post_scale"] <= 1.0

    def test_empty_pool_names_class(self, corpus, tmp_path):
        manifest, pools = corpus
        empty = tmp_path / "empty"
        empty.mkdir()
        with pytest.raises(ValueError, match="'Speech'"):
            build_v4(manifest, DegradationPlan(), {**pools, "Speech": str(empty)}, tmp_path / "o")
        missing = {k: v for k, v in pools.items() if k != "machinery"}
        with pytest.raises(ValueError, match="'machinery'"):
            build_v4(manifest, DegradationPlan(), missing, tmp_path / "o")

    def test_chained_ops_replay(self, corpus, tmp_path):
        manifest, pools = corpus
        v3 = build_v3(manifest, DegradationPlan(seed=1), tmp_path / "v3")
        write_manifest(v3, tmp_path / "v3" / "manifest.jsonl")
        v3 = read_manifest(tmp_path / "v3" / "manifest.jsonl")
        v4 = build_v4(v3, DegradationPlan(seed=1), pools, tmp_path / "v34")
        for src, it in zip(manifest.items, v4.items):
            assert [op["op"] for op in it.ops] == ["peak_normalize", "mix"]
            assert it.source == str(manifest.resolve(src).resolve())
            np.testing.assert_array_equal(replay_item(it).samples, load_wav(v4.resolve(it)).samples)


class TestAssemble:
    def test_train_excludes_test_fold(self, corpus, tmp_path):
        manifest, _ = corpus
        v3 = build_v3(manifest, DegradationPlan(), tmp_path / "v3")
        split = assemble_eval(manifest, v3, 2)
        assert {it.fold for it in split.train.items} == {0, 1}
        assert {it.fold for it in split.test.items} == {2}
        assert len(split.test) == 6

    def test_mixed_is_union(self, corpus, tmp_path):
        manifest, pools = corpus
        v4 = build_v4(manifest, DegradationPlan(), pools, tmp_path / "v4")
        split = assemble_mixed(manifest, [manifest, v4], 0)
        assert len(split.test) == 12
        assert len({it.origin for it in split.test.items}) == 6

    def test_fold_mismatch(self, corpus):
        manifest, _ = corpus
        partial = Manifest([it for it in manifest.items if it.fold != 1], manifest.base_dir)
        with pytest.raises(ValueError, match="fold mismatch"):
            assemble_eval(manifest, partial, 0)

    def test_leak_detected(self, corpus):
        manifest, _ = corpus
        # a fold-0 test item that is really a fold-1 training recording
        items = [ManifestItem(it.path, it.label, it.fold) for it in manifest.items]
        items[0].path = "Music/f1_0.wav"
        leaky = Manifest(items, manifest.base_dir)
        with pytest.raises(ValueError, match="share"):
            assemble_eval(manifest, leaky, 0)


def test_manifest_round_trip(corpus, tmp_path):
    manifest, _ = corpus
    write_manifest(manifest, tmp_path / "m.jsonl")
    again = read_manifest(tmp_path / "m.jsonl")
    assert [it.to_dict() for it in again.items] == [it.to_dict() for it in manifest.items]


def test_manifest_missing_field(tmp_path):
    (tmp_path / "m.jsonl").write_text('{"path": "a.wav", "label": "Music"}\n')
    with pytest.raises(ValueError, match="fold"):
        read_manifest(tmp_path / "m.jsonl")
