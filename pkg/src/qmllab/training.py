"""Epoch loop, evaluation and the train/report records shared by every model kind."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, DatasetSplit, overlay_label, wrong_labels
from .errors import ConfigurationError, InputError, TrainingError
from .losses import softmax_cross_entropy
from .models import Classifier, ForwardForwardModel, Model
from .optim import OptimizerKind, OptimizerState, optimizer_step

__all__ = [
    "TrainConfig",
    "TrainReport",
    "evaluate",
    "optimizer_step",
    "softmax_cross_entropy",
    "train",
]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 16
    learning_rate: float = 0.01
    optimizer: OptimizerKind = OptimizerKind.ADAM
    seed: int = 1
    shuffle: bool = True

    def __post_init__(self):
        if not isinstance(self.optimizer, OptimizerKind):
            try:
                object.__setattr__(self, "optimizer", OptimizerKind(str(self.optimizer).lower()))
            except ValueError:
                raise ConfigurationError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}") from None
        self.validate()

    def validate(self):
        def is_int(v):
            return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

        if not is_int(self.epochs) or self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs!r}")
        if not is_int(self.batch_size) or self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size!r}")
        lr = self.learning_rate
        if isinstance(lr, bool) or not isinstance(lr, (int, float)) or not math.isfinite(lr) or lr <= 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {lr!r}")
        if not is_int(self.seed) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.shuffle, bool):
            raise ConfigurationError(f"shuffle must be a boolean, got {self.shuffle!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = self.optimizer.value
        d["learning_rate"] = float(self.learning_rate)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {"epochs", "batch_size", "learning_rate", "optimizer", "seed", "shuffle"}
        if unknown:
            raise ConfigurationError(f"unknown train config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainReport:
    epoch_loss: list = field(default_factory=list)
    epoch_test_accuracy: list = field(default_factory=list)
    train_accuracy: float = 0.0
    test_accuracy: float = 0.0
    wall_time: float = 0.0

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "epoch_loss": [float(v) for v in self.epoch_loss],
            "epoch_test_accuracy": [float(v) for v in self.epoch_test_accuracy],
            "train_accuracy": float(self.train_accuracy),
            "test_accuracy": float(self.test_accuracy),
        }
        if timing:
            d["wall_time"] = float(self.wall_time)
        return d

    def to_json(self, timing: bool = False) -> str:
        """Deterministic document; wall time is left out unless asked for."""
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    def curve_table(self) -> str:
        """Tab-separated epoch / loss / test accuracy series, ready for plotting."""
        lines = ["epoch\tloss\ttest_accuracy"]
        for i, (loss, acc) in enumerate(zip(self.epoch_loss, self.epoch_test_accuracy), start=1):
            lines.append(f"{i}\t{loss:.10g}\t{acc:.10g}")
        return "\n".join(lines) + "\n"


def _as_dataset(samples) -> Dataset:
    if isinstance(samples, Dataset):
        return samples
    return Dataset.from_samples(samples)


def evaluate(model: Model, samples) -> float:
    """Fraction of samples whose predicted label matches."""
    ds = _as_dataset(samples)
    if len(ds) == 0:
        raise InputError("cannot evaluate on an empty sample set")
    pred = np.asarray(model.predict(ds.x))
    return float(np.mean(pred == ds.y))


def _batches(n, batch_size, order):
    for lo in range(0, n, batch_size):
        yield order[lo : lo + batch_size]


def _check_finite(loss, params, epoch):
    if not math.isfinite(loss) or not all(np.all(np.isfinite(p)) for p in params):
        raise TrainingError(f"non-finite loss or parameters in epoch {epoch}")


def train(model: Model, split: DatasetSplit, config: TrainConfig) -> TrainReport:
    """Train ``model`` on ``split.train``; FF kinds use layer-local updates."""
    config.validate()
    if len(split.train) == 0 or len(split.test) == 0:
        raise InputError("train and test parts must both be nonempty")
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    x, y = split.train.x, split.train.y
    n = len(split.train)
    report = TrainReport()

    if isinstance(model, ForwardForwardModel):
        model.reset_optimizers(config.optimizer)
        n_cls = model.spec.readout_classes
    elif isinstance(model, Classifier):
        opt = OptimizerState(config.optimizer)
    else:
        raise ConfigurationError(f"cannot train {type(model).__name__}")

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        if isinstance(model, ForwardForwardModel):
            # fresh wrong labels every epoch
            neg_labels = wrong_labels(y, rng, n_cls)
            for idx in _batches(n, config.batch_size, order):
                pos = overlay_label(x[idx], y[idx])
                neg = overlay_label(x[idx], neg_labels[idx])
                loss = model.train_batch(pos, neg, config.learning_rate)
                _check_finite(loss, model.parameters(), epoch)
                total += loss * len(idx)
        else:
            for idx in _batches(n, config.batch_size, order):
                loss, grads = model.loss_and_grads(x[idx], y[idx])
                _check_finite(loss, grads, epoch)
                optimizer_step(opt, model.parameters(), grads, config.learning_rate)
                total += loss * len(idx)
        report.epoch_loss.append(total / n)
        report.epoch_test_accuracy.append(evaluate(model, split.test))

    report.train_accuracy = evaluate(model, split.train)
    report.test_accuracy = report.epoch_test_accuracy[-1]
    report.wall_time = time.perf_counter() - start
    return report
