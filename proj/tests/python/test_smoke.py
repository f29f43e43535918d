import math
import os
import subprocess

import numpy as np
import pytest

import tcanet


def small_synth(**overrides):
    cfg = {"num_videos": 6, "length": 32, "channels": 8, "seed": 3}
    cfg.update(overrides)
    return tcanet.synth_dataset(cfg)


def small_model(seed=1):
    cfg = {
        "channels": 8,
        "num_blocks": 1,
        "num_groups": 4,
        "num_local_groups": 2,
        "window_size": 3,
        "num_stages": 2,
        "head_hidden": 6,
    }
    return tcanet.Model(cfg, seed)


def test_tiou_and_geometry():
    assert tcanet.tiou((0.0, 0.4), (0.2, 0.6)) == pytest.approx(1 / 3)
    assert tcanet.tiou((0.0, 0.1), (0.5, 0.6)) == 0.0
    frame, segment = tcanet.apply_offsets((0.2, 0.6), 0.0, 0.0, 0.0, 0.0)
    assert frame == (0.2, 0.6) and segment == (0.2, 0.6)
    assert tcanet.fuse_proposals((0.1, 0.5), (0.3, 0.7), 0.5) == pytest.approx((0.2, 0.6))


def test_targets_invert_offsets():
    p, g = (0.2, 0.5), (0.25, 0.55)
    ds, de, dx, dw = tcanet.regression_targets(p, g)
    frame, segment = tcanet.apply_offsets(p, ds, de, dx, dw)
    assert frame == pytest.approx(g, abs=1e-12)
    assert segment == pytest.approx(g, abs=1e-12)


def test_soft_nms_decays_overlap():
    out = tcanet.soft_nms([(0.1, 0.5, 0.9), (0.1, 0.5, 0.8), (0.6, 0.9, 0.7)], sigma=0.4)
    assert out[0] == (0.1, 0.5, 0.9)
    assert out[1] == (0.6, 0.9, 0.7)
    assert out[2][2] == pytest.approx(0.8 * math.exp(-1 / 0.4))
    assert tcanet.fuse_scores(0.5, 0.4) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        tcanet.fuse_scores(1.5, 0.4)


def test_perfect_proposals_score_full_auc():
    videos = [([(0.1, 0.3, 1.0)], [(0.1, 0.3)]), ([(0.4, 0.9, 1.0)], [(0.4, 0.9)])]
    assert tcanet.auc(videos) == pytest.approx(100.0)
    assert tcanet.average_recall(videos, 1) == pytest.approx(1.0)


def test_synth_is_deterministic_and_round_trips(tmp_path):
    a, b = small_synth(), small_synth()
    assert len(a) == 6
    np.testing.assert_array_equal(a[0].features.features, b[0].features.features)
    assert a[0].features.features.shape == (32, 8)
    assert a[0].candidates and a[0].ground_truths
    tcanet.write_dataset(tmp_path, a)
    back = tcanet.load_dataset(tmp_path)
    assert [v.video_id for v in back] == [v.video_id for v in a]
    np.testing.assert_allclose(back[0].features.features, a[0].features.features, atol=1e-6)


def test_feature_file_round_trip(tmp_path):
    x = np.arange(12, dtype=float).reshape(4, 3)
    x[3] = 0.0
    seq = tcanet.FeatureSequence(x, 8, 3)
    path = tmp_path / "v.tcaf"
    tcanet.write_features(path, seq)
    back = tcanet.load_features(path)
    assert (len(back), back.channels, back.snippet_interval, back.valid_len) == (4, 3, 8, 3)
    np.testing.assert_array_equal(back.features, x)
    path.write_bytes(b"junk")
    with pytest.raises(tcanet.FormatError):
        tcanet.load_features(path)


def test_model_refine_and_checkpoint(tmp_path):
    videos = small_synth()
    model = small_model()
    v = videos[0]
    out = model.refine(v.features, v.candidates)
    assert len(out) == len(v.candidates)
    assert all(0.0 <= s <= 1.0 for _, _, s in out)
    assert [s for _, _, s in out] == sorted((s for _, _, s in out), reverse=True)
    path = tmp_path / "m.tcap"
    model.save(path)
    loaded = tcanet.Model.load(path)
    assert loaded.config == model.config
    np.testing.assert_allclose(loaded.refine(v.features, v.candidates), out, atol=1e-5)
    assert loaded.config["window_size"] == 3
    assert model.with_settings(stages=1).config["num_stages"] == 1


def test_train_then_evaluate():
    videos = small_synth()
    model, history = tcanet.train(videos, small_model(), {"epochs": 2, "batch_size": 3, "seed": 5})
    assert [h["epoch"] for h in history] == [1, 2]
    assert all(math.isfinite(h["mean_total"]) for h in history)
    proposals = {v.video_id: model.refine(v.features, v.candidates) for v in videos}
    report = tcanet.evaluate(videos, proposals)
    assert 0.0 <= report["auc"] <= 100.0
    assert 0.0 <= report["average_map"] <= 1.0


def test_cli_in_process_and_binary(tmp_path):
    code, out, err = tcanet.run_cli(["synth", "--out", str(tmp_path / "d"), "--videos", "2", "--t", "16", "--c", "4"])
    assert code == 0, err
    assert len(tcanet.load_dataset(tmp_path / "d")) == 2
    assert tcanet.run_cli(["refine"])[0] == 2
    binary = os.environ.get("TCANET_CLI")
    if binary:
        assert subprocess.run([binary, "bogus"], capture_output=True).returncode == 2
