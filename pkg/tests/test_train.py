import numpy as np
import pytest

from snndecode.errors import NumericError
from snndecode.network import NetworkSpec, init_params
from snndecode.train import (
    TrainConfig,
    TrainingLog,
    decode_sequence,
    fit,
    make_windows,
)


def toy_data(n, channels=3, outputs=2, seed=0):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, channels)).astype(np.float32)
    vels = rng.normal(size=(n, outputs)).astype(np.float32)
    return feats, vels


def toy_config(**kw):
    kw.setdefault("window_len", 5)
    kw.setdefault("warmup_discard", 1)
    kw.setdefault("batch_size", 8)
    kw.setdefault("epochs", 2)
    return TrainConfig(**kw)


def toy_spec(config, channels=3, outputs=2):
    return NetworkSpec(layer_widths=(channels, 6, 6, 6, outputs),
                       window_len=config.window_len,
                       reset_mode=config.reset_mode,
                       dropout_p=config.dropout_p)


# ---------------------------------------------------------------- windows

def test_window_count_exact_cover():
    feats, vels = toy_data(10)
    ds = make_windows(feats, vels, 10)
    assert len(ds) == 1


def test_window_count_full_overlap():
    feats, vels = toy_data(16340, channels=1)
    ds = make_windows(feats, vels, 10)
    assert len(ds) == 16331        # N - T + 1


def test_window_disjoint():
    feats, vels = toy_data(20)
    ds = make_windows(feats, vels, 10, overlap=0)
    assert len(ds) == 2
    x0, _ = ds[0]
    x1, _ = ds[1]
    assert np.array_equal(x0, feats[:10])
    assert np.array_equal(x1, feats[10:])


def test_window_contents_are_consecutive():
    feats, vels = toy_data(12)
    ds = make_windows(feats, vels, 5)
    x, y = ds[3]
    assert np.array_equal(x, feats[3:8])
    assert np.array_equal(y, vels[3:8])


def test_too_few_frames():
    feats, vels = toy_data(4)
    with pytest.raises(ValueError):
        make_windows(feats, vels, 10)


# -------------------------------------------------------------------- fit

def test_zero_epochs_returns_initial_params():
    feats, vels = toy_data(40)
    config = toy_config(epochs=0, seed=3)
    spec = toy_spec(config)
    params = init_params(spec, np.random.default_rng(config.seed))
    ds = make_windows(feats, vels, config.window_len)
    trained, log = fit(ds, config, spec=spec, params=params)
    for a, b in zip(trained.layers, params.layers):
        assert np.array_equal(a.weight, b.weight)
        assert np.array_equal(a.tau, b.tau)
    assert log.records == []


def test_same_seed_bitwise_identical_logs():
    feats, vels = toy_data(60, seed=2)
    logs = []
    for _ in range(2):
        config = toy_config(seed=11, epochs=3)
        ds = make_windows(feats, vels, config.window_len)
        _, log = fit(ds, config, val_features=feats, val_velocities=vels)
        logs.append(log.canonical())
    assert logs[0] == logs[1]


def test_different_seed_differs():
    feats, vels = toy_data(60, seed=2)
    outs = []
    for seed in (1, 2):
        config = toy_config(seed=seed)
        ds = make_windows(feats, vels, config.window_len)
        params, _ = fit(ds, config)
        outs.append(params.layers[0].weight)
    assert not np.array_equal(outs[0], outs[1])


def test_training_reduces_loss():
    feats, vels = toy_data(300, seed=4)
    config = toy_config(epochs=8, seed=0)
    ds = make_windows(feats, vels, config.window_len)
    _, log = fit(ds, config)
    losses = [r.train_loss for r in log.records]
    assert losses[-1] < losses[0]


def test_tau_stays_clamped_through_training():
    feats, vels = toy_data(80, seed=5)
    config = toy_config(epochs=4, learning_rate=0.3)   # aggressive steps
    ds = make_windows(feats, vels, config.window_len)
    params, _ = fit(ds, config)
    for layer in params.layers:
        assert layer.tau.min() >= 0.0
        assert layer.tau.max() <= 1.0


def test_fixed_tau_untouched():
    feats, vels = toy_data(80, seed=6)
    config = toy_config(epochs=3, trainable_tau=False, tau_init=0.5)
    ds = make_windows(feats, vels, config.window_len)
    params, _ = fit(ds, config)
    for layer in params.layers:
        assert np.all(layer.tau == np.float32(0.5))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_aborts_with_diagnostic():
    feats, vels = toy_data(200, seed=7)
    config = toy_config(epochs=10, learning_rate=1e12)  # guaranteed blow-up
    ds = make_windows(feats, vels, config.window_len)
    with pytest.raises(NumericError, match="non-finite"):
        fit(ds, config)


def test_log_echoes_config():
    feats, vels = toy_data(40, seed=8)
    config = toy_config(epochs=1, seed=9)
    ds = make_windows(feats, vels, config.window_len)
    _, log = fit(ds, config)
    assert log.config["seed"] == 9
    assert log.config["learning_rate"] == config.learning_rate
    text = log.canonical()
    assert text.startswith("# config ")
    assert '"seed": 9' in text


def test_log_one_record_per_epoch():
    feats, vels = toy_data(60, seed=9)
    config = toy_config(epochs=5)
    ds = make_windows(feats, vels, config.window_len)
    _, log = fit(ds, config, val_features=feats, val_velocities=vels)
    assert len(log.records) == 5
    assert [r.epoch for r in log.records] == list(range(5))


def test_decode_sequence_shapes():
    feats, vels = toy_data(50, seed=10)
    config = toy_config(epochs=1)
    spec = toy_spec(config)
    params = init_params(spec, np.random.default_rng(0))
    preds = decode_sequence(params, spec, feats)
    assert preds.shape == (50, 2)
    assert np.isfinite(preds).all()
