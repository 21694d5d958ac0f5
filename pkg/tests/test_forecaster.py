import numpy as np
import pytest
import torch
from torch import nn

from tsaugan.data_pipeline import SequenceSample, SequenceSet, WindowSpec
from tsaugan.errors import (
    EmptySet,
    InvalidConfig,
    ShapeMismatch,
    SyntheticInTestSet,
    TsauganError,
    WindowMismatch,
)
from tsaugan.forecaster import (
    EvalResult,
    ForecasterConfig,
    ForecastModel,
    build_forecaster,
    evaluate_mse,
    predict,
    train_forecaster,
)

WINDOW = WindowSpec(k=24, t=16, s=8)
FAST = ForecasterConfig(
    hidden_size=16, num_layers=2, input_len=16, horizon=8, epochs=5, batch_size=8, seed=0
)


def constant_set(n, value=0.5, tag="train", window=WINDOW):
    return SequenceSet(
        [SequenceSample(np.full(window.k, value)) for _ in range(n)], window, tag
    )


def line_set(n, seed, tag="train", window=WINDOW):
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        slope = rng.uniform(-0.03, 0.03)
        intercept = rng.uniform(0.2, 0.8)
        samples.append(SequenceSample(intercept + slope * np.arange(window.k)))
    return SequenceSet(samples, window, tag)


class FixedOutputModel(nn.Module):
    """Evaluation stub that returns a preset forecast for every sample."""

    def __init__(self, cfg, output):
        super().__init__()
        self.cfg = cfg
        self.output = torch.as_tensor(output, dtype=torch.float64)

    def forward(self, obs):
        return self.output.expand(obs.shape[0], -1).clone()


# --- config ---

def test_default_config_values():
    cfg = ForecasterConfig()
    assert (cfg.hidden_size, cfg.num_layers, cfg.dropout) == (64, 3, 0.2)
    assert (cfg.input_len, cfg.horizon) == (60, 30)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ForecasterConfig(dropout=1.0)
    with pytest.raises(InvalidConfig):
        ForecasterConfig(num_layers=0)


# --- training ---

def test_train_constant_sequences_converges_quickly():
    cfg = ForecasterConfig(input_len=16, horizon=8, epochs=50, batch_size=16, seed=1)
    model, history = train_forecaster(constant_set(48), constant_set(8, tag="validation"), cfg)
    result = evaluate_mse(model, constant_set(8, tag="test"))
    assert result.mse < 1e-4
    assert len(history) == 50


def test_train_zero_epochs_returns_initialized_model():
    from dataclasses import replace

    model, history = train_forecaster(
        constant_set(8), constant_set(2, tag="validation"), replace(FAST, epochs=0)
    )
    assert history == []
    assert isinstance(model, ForecastModel)


def test_train_deterministic_trajectory():
    train_set = line_set(24, seed=3)
    val_set = line_set(6, seed=4, tag="validation")
    _, hist_a = train_forecaster(train_set, val_set, FAST)
    _, hist_b = train_forecaster(train_set, val_set, FAST)
    assert hist_a == hist_b


def test_returned_model_is_best_validation_snapshot():
    train_set = line_set(24, seed=5)
    val_set = line_set(6, seed=6, tag="validation")
    model, history = train_forecaster(train_set, val_set, FAST)
    x_val = torch.from_numpy(val_set.values_matrix()[:, :16]).float()
    y_val = torch.from_numpy(val_set.values_matrix()[:, 16:]).float()
    with torch.no_grad():
        val_loss = float(((model(x_val) - y_val) ** 2).mean())
    assert val_loss == pytest.approx(min(history), abs=1e-7)
    assert all(val_loss <= h + 1e-12 for h in history)


def test_train_refuses_test_tag_and_empty():
    with pytest.raises(TsauganError):
        train_forecaster(constant_set(4, tag="test"), constant_set(2, tag="validation"), FAST)
    with pytest.raises(EmptySet):
        train_forecaster(SequenceSet([], WINDOW, "train"), constant_set(2, tag="validation"), FAST)
    with pytest.raises(EmptySet):
        train_forecaster(constant_set(4), SequenceSet([], WINDOW, "validation"), FAST)


def test_train_window_mismatch():
    other = SequenceSet(
        [SequenceSample(np.zeros(24))], WindowSpec(k=24, t=20, s=4), "train"
    )
    with pytest.raises(WindowMismatch):
        train_forecaster(other, constant_set(2, tag="validation"), FAST)


# --- predict ---

def test_predict_output_lengths_match_paper_window_shapes():
    for t, s in ((60, 30), (80, 40)):
        cfg = ForecasterConfig(hidden_size=8, num_layers=1, input_len=t, horizon=s, seed=0)
        model = build_forecaster(cfg, seed=0)
        out = predict(model, np.linspace(0.0, 1.0, t))
        assert out.shape == (s,)
        assert np.isfinite(out).all()


def test_predict_is_pure():
    model = build_forecaster(FAST, seed=2)
    obs = np.linspace(0.0, 1.0, 16)
    assert np.array_equal(predict(model, obs), predict(model, obs))


def test_predict_rejects_bad_shapes():
    model = build_forecaster(FAST, seed=0)
    with pytest.raises(ShapeMismatch):
        predict(model, np.zeros(15))
    with pytest.raises(ValueError):
        predict(model, np.full(16, np.nan))


# --- evaluate ---

def test_evaluate_exact_truth_gives_zero():
    test_set = constant_set(5, value=0.3, tag="test")
    truth = test_set.values_matrix()[0, 16:]
    model = FixedOutputModel(FAST, truth)
    result = evaluate_mse(model, test_set)
    assert result == EvalResult(mse=0.0, n_samples=5, split="test")


def test_evaluate_constant_offset():
    test_set = constant_set(5, value=0.3, tag="test")
    truth = test_set.values_matrix()[0, 16:]
    model = FixedOutputModel(FAST, truth + 0.1)
    assert evaluate_mse(model, test_set).mse == pytest.approx(0.01, abs=1e-9)


def test_evaluate_hand_computed_two_samples():
    rows = [np.zeros(24), np.ones(24)]
    test_set = SequenceSet([SequenceSample(r) for r in rows], WINDOW, "test")
    model = FixedOutputModel(FAST, np.full(8, 0.25))
    # per-element errors: 0.0625 on the zero row, 0.5625 on the ones row
    assert evaluate_mse(model, test_set).mse == pytest.approx((0.0625 + 0.5625) / 2, abs=1e-9)


def test_evaluate_rejects_synthetic_samples():
    bad = SequenceSet(
        [SequenceSample(np.zeros(24), origin="synthetic")], WINDOW, "test"
    )
    model = FixedOutputModel(FAST, np.zeros(8))
    with pytest.raises(SyntheticInTestSet):
        evaluate_mse(model, bad)


def test_evaluate_rejects_training_split_and_empty():
    model = FixedOutputModel(FAST, np.zeros(8))
    with pytest.raises(TsauganError):
        evaluate_mse(model, constant_set(3, tag="train"))
    with pytest.raises(EmptySet):
        evaluate_mse(model, SequenceSet([], WINDOW, "test"))


def test_evaluate_uses_only_observation_window():
    cfg = ForecasterConfig(hidden_size=8, num_layers=1, input_len=16, horizon=8, seed=3)
    model = build_forecaster(cfg, seed=3)
    base = np.linspace(0.0, 1.0, 24)
    obs = base[:16]
    pred_direct = predict(model, obs)
    tampered = base.copy()
    tampered[16:] = 99.0
    assert np.array_equal(predict(model, tampered[:16]), pred_direct)
