import numpy as np
import pytest

import linf


def micro_config():
    c = linf.ModelConfig()
    c.channels = 8
    c.residual_blocks = 1
    c.frequencies = 4
    c.flow_layers = 3
    c.conditioner_width = 16
    c.phase_hidden = 8
    return c


def micro_train():
    t = linf.TrainConfig()
    t.lr_crop = 4
    t.scale_max = 2.0
    t.batch = 2
    t.steps = 4
    t.steps_per_epoch = 2
    t.halve_at_epochs = [1]
    t.learning_rate = 1e-3
    t.seed = 3
    return t


def test_metrics():
    a = np.zeros((16, 16, 3))
    b = np.full((16, 16, 3), 0.5)
    assert linf.psnr(a, b) == pytest.approx(20 * np.log10(2), abs=1e-12)
    assert linf.ssim(b, b) == pytest.approx(1.0)
    assert linf.diversity([b, b, b]) == 0.0


def test_resamplers_shapes():
    img = linf.procedural_corpus(1, 24, 0)[0]
    assert img.shape == (24, 24, 3)
    assert linf.bicubic_resample(img, 12, 10).shape == (12, 10, 3)
    assert linf.bilinear_upsample(img, 30, 31).shape == (30, 31, 3)
    with pytest.raises(ValueError):
        linf.psnr(np.zeros((4, 4)), np.zeros((4, 4)))


def test_fresh_model_tau_zero_is_deterministic():
    m = linf.Model.create(micro_config(), 1)
    lr = linf.bicubic_resample(linf.procedural_corpus(1, 24, 2)[0], 12, 12)
    a = m.super_resolve(lr, 2.5, tau=0.0, seed=1)
    b = m.super_resolve(lr, 2.5, tau=0.0, seed=9)
    assert a.shape == (30, 30, 3)
    np.testing.assert_array_equal(a, b)
    local = m.super_resolve(lr, 2.5, tau=0.5, seed=1, ensemble="local")
    assert local.shape == (30, 30, 3)
    assert np.all((local >= 0) & (local <= 1))


def test_trainer_replay_and_save(tmp_path):
    corpus = linf.procedural_corpus(4, 16, 3)

    def run():
        t = linf.Trainer(linf.Model.create(micro_config(), 3), micro_train(), corpus)
        rows = []
        while not t.finished:
            rows.append(t.step())
        return t, rows

    ta, ra = run()
    tb, rb = run()
    assert ra == rb
    assert ta.checkpoint_bytes() == tb.checkpoint_bytes()
    assert ta.checkpoint_bytes()[:4] == b"LINF"
    assert [r["step"] for r in ra] == [1, 2, 3, 4]
    path = tmp_path / "m.linf"
    ta.save(path)
    loaded = linf.Model.load(path)
    assert loaded.config.flow_layers == 3
    assert loaded.parameter_count == ta.model.parameter_count


def test_bad_config_raises():
    c = micro_config()
    c.channels = 2
    with pytest.raises(linf.ConfigError):
        linf.Model.create(c, 0)
    with pytest.raises(linf.UsageError):
        linf.Model.load("/nonexistent/model.linf")


def test_verify_fast_passes():
    results = linf.verify("fast", 0)
    assert len(results) == 7
    assert all(r["passed"] for r in results), results
