import json
import math

import numpy as np
import pytest

from persa.frontends import FrontEnd, FrontEndConfig, SampleContext, apply_frontend
from persa.degrade import peak_normalize_dbfs
from persa.probe_eval import BenchSettings, Workbench, pool_features
from persa.probe_eval.bench import _FEAT_TEST, _TEST
from persa.tf_pipeline import mel_magnitude

SMALL = BenchSettings(n_per_class=10, pool_size=4)


@pytest.fixture(scope="module")
def wb():
    return Workbench(7, SMALL)


def test_benchmark_reports_each_repeat(wb):
    res = wb.benchmark(FrontEndConfig(kind=FrontEnd.PERSA), "clean", 3)
    assert len(res.accuracies) == 3
    assert res.mean == pytest.approx(np.mean(res.accuracies))
    assert res.std == pytest.approx(np.std(res.accuracies))
    d = res.to_dict()
    assert d["repeats"] == 3 and d["frontend"]["kind"] == "persa"


def test_unknown_scenario(wb):
    with pytest.raises(ValueError, match="scenario"):
        wb.benchmark(FrontEndConfig(), "reverb", 1)


def test_mixed_is_clean_plus_noisy(wb):
    rep = wb.repeat(0)
    clean, y = rep.test("clean")
    noisy, _ = rep.test("noisy")
    mixed, ym = rep.test("mixed")
    assert len(mixed) == 2 * len(clean) and np.array_equal(ym, np.concatenate([y, y]))
    cfg = FrontEndConfig(kind=FrontEnd.LOG)
    a = wb.benchmark(cfg, "clean", 1).mean
    b = wb.benchmark(cfg, "noisy", 1).mean
    assert wb.benchmark(cfg, "mixed", 1).mean == pytest.approx((a + b) / 2)


def test_byte_identical_reports():
    a = Workbench(3, SMALL).sweep([9.0, math.inf], [math.inf, 6.0], 2, [30.0]).to_json()
    b = Workbench(3, SMALL).sweep([9.0, math.inf], [math.inf, 6.0], 2, [30.0]).to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["q_list"] == ["9", "inf"] and np.array(doc["accuracy_mean"]).shape == (2, 2)


def test_sweep_corner_is_persa(wb):
    rep = wb.sweep([math.inf], [math.inf], 3, [30.0])
    persa = wb.benchmark(FrontEndConfig(kind=FrontEnd.PERSA), "clean", 3)
    assert rep.mean[0, 0] == pytest.approx(persa.mean, abs=1e-12)


def test_table_layout(wb):
    rep = wb.sweep([3.0, 9.0], [math.inf, 3.0], 1, [12.0, 30.0])
    lines = rep.to_table().splitlines()
    assert "∞" in lines[1] and lines[2].startswith("3") and "±" in lines[2]
    best = (100 * rep.mean).max(axis=0)
    n_marked = sum(line.count("*") for line in lines[2:4])
    assert n_marked == int(np.sum(100 * rep.mean >= best - 1.0))
    assert sum("c = " in line for line in lines) == 2


def test_training_never_sees_test_statistics(wb):
    rep = wb.repeat(1)
    cfg = FrontEndConfig(kind=FrontEnd.LOG)
    wb.benchmark(cfg, "gain", 2)
    model = rep._cache[("model", cfg)]
    train_tfs, _ = rep.train()
    X = np.stack([pool_features(apply_frontend(S, cfg)) for S in train_tfs])
    np.testing.assert_allclose(model.feature_mean, X.mean(axis=0))


@pytest.mark.parametrize("kind", [FrontEnd.PERSA, FrontEnd.PERSA_PLUS, FrontEnd.LOG_T])
def test_argmax_gain_invariance(wb, kind):
    rep = wb.repeat(0)
    cfg = FrontEndConfig(kind=kind)
    wb.benchmark(cfg, "clean", 1)
    model = rep._cache[("model", cfg)]
    clips, _ = rep._clips(_TEST)
    master = _FEAT_TEST
    preds = []
    for level in (0.0, -10.0, -20.0, -30.0):
        feats = []
        for i, w in enumerate(clips):
            S = mel_magnitude(peak_normalize_dbfs(w, level), rep.pipeline, rep.fb)
            feats.append(pool_features(apply_frontend(S, FrontEndConfig(kind=kind, augment=False),
                                                      SampleContext(master, i), fb=rep.fb)))
        preds.append(model.predict(np.stack(feats)))
    for p in preds[1:]:
        assert np.array_equal(p, preds[0])


@pytest.mark.parametrize("kind", list(FrontEnd))
def test_loss_monotone_on_default_task(wb, kind):
    cfg = FrontEndConfig(kind=kind)
    wb.benchmark(cfg, "clean", 1)
    h = wb.repeat(0)._cache[("model", cfg)].loss_history
    assert len(h) == SMALL.hyper.epochs + 1
    assert all(b <= a for a, b in zip(h, h[1:]))
