"""Forward-forward models: quantum (QFF) and classical.

Each layer trains on its own objective: push goodness above the threshold
for label-overlaid real data and below it for wrong-label data. No gradient
crosses a layer boundary; a layer's input is the previous layer's output,
re-expressed as angles (quantum) or length-normalized (classical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..data import overlay_label
from ..errors import ShapeError
from ..gradients import Activation, DenseLayer, GradTape, dense_backward, dense_forward
from ..losses import sigmoid, softplus
from ..optim import OptimizerState, optimizer_step
from .base import Model
from .quantum import QuantumLayer
from .spec import ModelSpec

NUM_FEATURES = 16
QFF_LAYERS = 2
_NORM_EPS = 1e-8


def goodness(expectations) -> np.ndarray | float:
    """Sum of squared activities over the last axis."""
    e = np.asarray(expectations, dtype=float)
    g = np.sum(e * e, axis=-1)
    return float(g) if np.ndim(g) == 0 else g


@dataclass
class FfLayerState:
    layer: QuantumLayer | DenseLayer
    threshold: float
    optimizer: OptimizerState = field(default_factory=OptimizerState)

    @property
    def is_quantum(self) -> bool:
        return isinstance(self.layer, QuantumLayer)

    @property
    def num_inputs(self) -> int:
        return self.layer.num_inputs if self.is_quantum else self.layer.n_in

    def params(self) -> list:
        if self.is_quantum:
            return [self.layer.theta]
        return [self.layer.weights, self.layer.bias]

    def activities(self, x) -> np.ndarray:
        if self.is_quantum:
            return self.layer.forward(x)
        return dense_forward(self.layer, np.atleast_2d(x))

    def next_input(self, activities) -> np.ndarray:
        """What the following layer sees."""
        if self.is_quantum:
            return (activities + 1.0) * (math.pi / 2)
        norm = np.linalg.norm(activities, axis=-1, keepdims=True)
        return activities / (norm + _NORM_EPS)

    def loss_and_grads(self, positive, negative):
        """Mean FF loss over both batches, and gradients aligned with ``params()``."""
        positive = np.atleast_2d(np.asarray(positive, dtype=float))
        negative = np.atleast_2d(np.asarray(negative, dtype=float))
        if positive.shape[0] == 0 or negative.shape[0] == 0:
            raise ShapeError("positive and negative batches must be nonempty")
        if positive.shape[1] != negative.shape[1] or positive.shape[1] != self.num_inputs:
            raise ShapeError(
                f"batch arity {positive.shape[1]}/{negative.shape[1]} vs layer input {self.num_inputs}"
            )
        n_pos, n_neg = positive.shape[0], negative.shape[0]
        x = np.concatenate([positive, negative])
        thr = self.threshold

        if self.is_quantum:
            res = self.layer.jacobians(x)
            acts = res.values
        else:
            tape = GradTape()
            acts = dense_forward(self.layer, x, tape)
        g = goodness(acts)
        g_pos, g_neg = g[:n_pos], g[n_pos:]
        loss = float(np.mean(softplus(thr - g_pos)) + np.mean(softplus(g_neg - thr)))
        # d loss / d g for each row
        dg = np.concatenate([-sigmoid(thr - g_pos) / n_pos, sigmoid(g_neg - thr) / n_neg])
        upstream = 2.0 * acts * dg[:, None]
        if self.is_quantum:
            return loss, [np.einsum("bk,bkp->p", upstream, res.params)]
        wg, bg, _ = dense_backward(self.layer, upstream, tape)
        return loss, [wg, bg]


def ff_train_step(layer: FfLayerState, positive_batch, negative_batch, learning_rate: float):
    """One local optimizer step on ``layer`` only. Returns (layer, loss before the step)."""
    loss, grads = layer.loss_and_grads(positive_batch, negative_batch)
    optimizer_step(layer.optimizer, layer.params(), grads, learning_rate)
    return layer, loss


class ForwardForwardModel(Model):
    layers: list[FfLayerState]

    def parameters(self):
        return [p for layer in self.layers for p in layer.params()]

    def layer_inputs(self, x):
        """Yield (layer, its input, its activities) through the stack."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        for layer in self.layers:
            acts = layer.activities(h)
            yield layer, h, acts
            h = layer.next_input(acts)

    def goodness_per_layer(self, x) -> np.ndarray:
        return np.stack([goodness(acts) for _, _, acts in self.layer_inputs(x)], axis=1)

    def total_goodness(self, x) -> np.ndarray:
        return self.goodness_per_layer(x).sum(axis=1)

    def train_batch(self, positive, negative, learning_rate) -> float:
        """Train every layer on the batch, layer by layer; returns the summed loss."""
        total = 0.0
        for layer in self.layers:
            _, loss = ff_train_step(layer, positive, negative, learning_rate)
            total += loss
            positive = layer.next_input(layer.activities(positive))
            negative = layer.next_input(layer.activities(negative))
        return total

    def reset_optimizers(self, kind) -> None:
        for layer in self.layers:
            layer.optimizer = OptimizerState(kind)

    def class_goodness(self, x) -> np.ndarray:
        """Total goodness for every candidate label overlay, shape (B, readout_classes)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n_cls = self.spec.readout_classes
        stacked = np.concatenate([overlay_label(x, c) for c in range(n_cls)])
        return self.total_goodness(stacked).reshape(n_cls, x.shape[0]).T

    def predict(self, x):
        return ff_predict(self, x)


class QuantumForwardForward(ForwardForwardModel):
    """Two quantum FF layers; the second encodes the first's <Z_j> as angles."""

    def __init__(self, spec: ModelSpec, num_features: int = NUM_FEATURES):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        n, d = spec.num_qubits, spec.ansatz_depth
        widths = [num_features] + [n] * (QFF_LAYERS - 1)
        self.layers = [FfLayerState(QuantumLayer(w, n, d, rng), spec.ff_threshold) for w in widths]


class ClassicalForwardForward(ForwardForwardModel):
    """ReLU dense FF layers with widths from the spec."""

    def __init__(self, spec: ModelSpec, num_features: int = NUM_FEATURES):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        dims = [num_features, *spec.classical_widths]
        self.layers = [
            FfLayerState(DenseLayer.init(a, b, rng, Activation.RELU), spec.ff_threshold)
            for a, b in zip(dims[:-1], dims[1:])
        ]


def ff_predict(model: ForwardForwardModel, features):
    """Label whose overlay maximizes total goodness; ties go to the lowest label."""
    features = np.asarray(features, dtype=float)
    labels = np.argmax(model.class_goodness(features), axis=1)
    return int(labels[0]) if features.ndim == 1 else labels
