import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmllab.data import Dataset, DatasetSplit, load_digit_angles, make_blobs, split
from qmllab.errors import ConfigurationError, InputError, ShapeError, TrainingError
from qmllab.losses import softmax_cross_entropy
from qmllab.models import ModelKind, build_model, default_spec
from qmllab.optim import OptimizerKind, OptimizerState, optimizer_step
from qmllab.training import TrainConfig, TrainReport, evaluate, train

from oracles import central_difference


def toy_split(seed=0):
    ds = make_blobs(40, seed=seed)
    return DatasetSplit(ds, ds, seed, 0.5, np.arange(40), np.arange(40))


class FixedPredictor:
    def __init__(self, fn):
        self.fn = fn

    def predict(self, x):
        return self.fn(x)


# loss


@pytest.mark.parametrize("label", [0, 4, 9])
def test_uniform_logits_give_ln10(label):
    loss, grad = softmax_cross_entropy(np.zeros(10), label)
    assert loss == pytest.approx(math.log(10), abs=1e-9)
    assert grad[label] == pytest.approx(0.1 - 1)


def test_saturated_logit_gives_near_zero_loss():
    logits = np.zeros(10)
    logits[2] = 50
    assert softmax_cross_entropy(logits, 2)[0] < 1e-9


def test_cross_entropy_gradient_matches_finite_difference():
    rng = np.random.default_rng(0)
    for _ in range(5):
        logits = rng.normal(0, 3, 10)
        label = int(rng.integers(10))
        _, grad = softmax_cross_entropy(logits, label)
        fd = central_difference(lambda v: softmax_cross_entropy(v, label)[0], logits, 1e-6)
        assert np.max(np.abs(grad - fd)) < 1e-7


def test_cross_entropy_batch_is_mean():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(4, 10))
    labels = np.array([0, 3, 3, 9])
    loss, grad = softmax_cross_entropy(logits, labels)
    singles = [softmax_cross_entropy(logits[i], labels[i]) for i in range(4)]
    assert loss == pytest.approx(np.mean([s[0] for s in singles]), abs=1e-12)
    assert np.allclose(grad, np.array([s[1] for s in singles]) / 4, atol=1e-15)


@pytest.mark.parametrize("label", [-1, 10])
def test_cross_entropy_label_range(label):
    with pytest.raises(InputError):
        softmax_cross_entropy(np.zeros(10), label)


@settings(max_examples=60, deadline=None)
@given(
    logits=st.lists(st.floats(-500, 500), min_size=10, max_size=10),
    label=st.integers(0, 9),
)
def test_cross_entropy_non_negative(logits, label):
    loss, grad = softmax_cross_entropy(np.array(logits), label)
    assert loss >= 0 and np.isfinite(loss) and np.all(np.isfinite(grad))


# optimizers


def test_sgd_step():
    theta = np.array([1.0])
    optimizer_step(OptimizerState(OptimizerKind.SGD), [theta], [np.array([2.0])], 0.1)
    assert theta[0] == pytest.approx(0.8, abs=1e-15)


@pytest.mark.parametrize("g", [1e-3, -0.7, 42.0])
def test_adam_first_step_is_lr(g):
    theta = np.array([0.5])
    optimizer_step(OptimizerState(OptimizerKind.ADAM), [theta], [np.array([g])], 0.01)
    assert abs(abs(theta[0] - 0.5) - 0.01) < 1e-6


def test_zero_gradient_keeps_parameters():
    a = np.array([1.0, -2.0, 3.0])
    optimizer_step(OptimizerState(OptimizerKind.SGD), [a], [np.zeros(3)], 0.5)
    assert np.array_equal(a, [1.0, -2.0, 3.0])
    b = np.array([1.0, -2.0, 3.0])
    state = OptimizerState(OptimizerKind.ADAM)
    for _ in range(3):
        optimizer_step(state, [b], [np.zeros(3)], 0.5)
    assert np.max(np.abs(b - [1.0, -2.0, 3.0])) < 1e-12


def test_optimizer_length_mismatch():
    with pytest.raises(ShapeError):
        optimizer_step(OptimizerState(), [np.zeros(2)], [np.zeros(2), np.zeros(1)], 0.1)
    with pytest.raises(ShapeError):
        optimizer_step(OptimizerState(), [np.zeros(2)], [np.zeros(3)], 0.1)


# config


@pytest.mark.parametrize(
    "bad",
    [{"epochs": 0}, {"batch_size": 0}, {"learning_rate": 0.0}, {"learning_rate": math.nan}, {"optimizer": "rmsprop"}, {"seed": -1}],
)
def test_train_config_rejects(bad):
    with pytest.raises(ConfigurationError):
        TrainConfig(**bad)


def test_train_config_round_trip_and_unknown_field():
    cfg = TrainConfig(epochs=3, optimizer="sgd")
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"epochs": 3, "momentum": 0.9})


# evaluate


def test_evaluate_perfect_and_permuted():
    ds = Dataset(np.arange(20, dtype=float).reshape(10, 2), np.arange(10))
    assert evaluate(FixedPredictor(lambda x: (x[:, 0] / 2).astype(int)), ds) == 1.0
    assert evaluate(FixedPredictor(lambda x: ((x[:, 0] / 2).astype(int) + 1) % 10), ds) == 0.0


def test_evaluate_empty_is_input_error():
    with pytest.raises(InputError):
        evaluate(FixedPredictor(lambda x: x), Dataset(np.zeros((0, 16)), np.zeros(0)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 1000), n=st.integers(1, 30))
def test_evaluate_bounds_and_self_concat(seed, n):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.uniform(0, math.pi, (n, 16)), rng.integers(0, 10, n))
    model = build_model(default_spec(ModelKind.CLASSICAL_MLP, seed=seed % 7))
    acc = evaluate(model, ds)
    assert 0 <= acc <= 1
    assert evaluate(model, ds.concat(ds)) == acc


@pytest.mark.parametrize("kind", [ModelKind.QMLP, ModelKind.QBP, ModelKind.BASELINE_QNN, ModelKind.CLASSICAL_MLP])
def test_untrained_models_are_near_chance(digits_csv, kind):
    data = split(load_digit_angles(digits_csv), 0.75, seed=1)
    for seed in range(5):
        acc = evaluate(build_model(default_spec(kind, seed=seed)), data.test)
        assert 0.0 <= acc <= 0.25, (kind, seed, acc)


# train


def test_train_rejects_empty_split():
    ds = make_blobs(8, seed=0)
    empty = ds.subset([])
    s = DatasetSplit(ds, empty, 0, 0.5, np.arange(8), np.arange(0))
    with pytest.raises(InputError):
        train(build_model(default_spec(ModelKind.CLASSICAL_MLP)), s, TrainConfig(epochs=1))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_classical_mlp_learns_toy_blobs(seed):
    report = train(
        build_model(default_spec(ModelKind.CLASSICAL_MLP, seed=seed, readout_classes=2)),
        toy_split(),
        TrainConfig(epochs=200, seed=seed),
    )
    assert report.train_accuracy >= 0.95
    assert len(report.epoch_loss) == 200
    # smoothed descent: 20-epoch moving average never rises after epoch 10
    avg = np.convolve(report.epoch_loss, np.ones(20) / 20, "valid")
    assert np.all(np.diff(avg[10:]) <= 0)


@pytest.mark.parametrize("kind", [ModelKind.CLASSICAL_FF, ModelKind.QBP])
def test_training_is_bit_identical(kind):
    def once():
        model = build_model(default_spec(kind, seed=4, readout_classes=2, num_qubits=4))
        return train(model, toy_split(), TrainConfig(epochs=2, seed=9)).to_json()

    assert once() == once()


def test_report_invariants_and_curve():
    report = train(build_model(default_spec(ModelKind.CLASSICAL_MLP, readout_classes=2)), toy_split(), TrainConfig(epochs=5))
    assert len(report.epoch_loss) == len(report.epoch_test_accuracy) == 5
    assert 0 <= report.train_accuracy <= 1 and 0 <= report.test_accuracy <= 1
    lines = report.curve_table().splitlines()
    assert lines[0] == "epoch\tloss\ttest_accuracy" and len(lines) == 6
    assert lines[3].split("\t")[0] == "3"
    assert "wall_time" not in report.to_json()


def test_non_finite_loss_is_training_error():
    model = build_model(default_spec(ModelKind.CLASSICAL_MLP, readout_classes=2))
    for p in model.parameters():
        p[...] = np.nan
    with pytest.raises(TrainingError):
        train(model, toy_split(), TrainConfig(epochs=1))


def test_report_defaults():
    r = TrainReport()
    assert r.epoch_loss == [] and r.to_dict(timing=True)["wall_time"] == 0.0
