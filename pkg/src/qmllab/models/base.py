from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from ..gradients import DenseLayer, GradTape, dense_backward, dense_forward
from .spec import ModelSpec


class Model:
    """Common surface: trainable arrays, flat get/set, prediction."""

    spec: ModelSpec

    @property
    def kind(self):
        return self.spec.kind

    def parameters(self) -> list:
        """Trainable arrays, in a fixed order. Optimizers update them in place."""
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        raise NotImplementedError

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def get_flat(self) -> np.ndarray:
        params = self.parameters()
        if not params:
            return np.zeros(0)
        return np.concatenate([p.ravel() for p in params])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.num_parameters():
            raise ShapeError(f"expected {self.num_parameters()} values, got {flat.size}")
        pos = 0
        for p in self.parameters():
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size

    def unflatten(self, flat) -> list:
        out, pos = [], 0
        for p in self.parameters():
            out.append(np.asarray(flat[pos : pos + p.size]).reshape(p.shape))
            pos += p.size
        return out


class Classifier(Model):
    """Models trained end to end on softmax cross-entropy over logits."""

    def forward(self, x) -> np.ndarray:
        raise NotImplementedError

    def loss_and_grads(self, x, y):
        """Mean cross-entropy over the batch and gradients aligned with ``parameters()``."""
        raise NotImplementedError

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        logits = self.forward(np.atleast_2d(x))
        labels = np.argmax(logits, axis=1)  # first maximum wins ties
        return int(labels[0]) if x.ndim == 1 else labels


def run_stack(layers: list[DenseLayer], x, tape: GradTape | None):
    for layer in layers:
        x = dense_forward(layer, x, tape)
    return x


def backprop_stack(layers: list[DenseLayer], upstream, tape: GradTape):
    """Backward through ``layers`` (popping the tape); returns ([wg, bg, ...], input_grad)."""
    grads = []
    for layer in reversed(layers):
        wg, bg, upstream = dense_backward(layer, upstream, tape)
        grads[:0] = [wg, bg]
    return grads, upstream


def stack_params(layers: list[DenseLayer]) -> list:
    out = []
    for layer in layers:
        out += [layer.weights, layer.bias]
    return out
