"""Logit-producing models: quantum MLP, quantum backprop, post-variational baseline, classical MLP."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from ..gradients import Activation, DenseLayer, GradTape, dense_backward, dense_forward
from ..losses import softmax_cross_entropy
from .base import Classifier, backprop_stack, run_stack, stack_params
from .quantum import QuantumLayer, ring_zz_readout, z_readout
from .spec import ModelSpec

NUM_FEATURES = 16
QMLP_ANGLES = 16


def _check_features(x, width):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != width:
        raise ShapeError(f"expected {width} features, got {x.shape[1]}")
    return x


def squash(h):
    """Map reals onto encoding angles in [0, pi]."""
    return (np.tanh(h) + 1.0) * (math.pi / 2)


def squash_derivative(h):
    return (math.pi / 2) * (1.0 - np.tanh(h) ** 2)


class QuantumMLP(Classifier):
    """Dense stack -> 16 squashed angles -> quantum layer -> <Z_j> -> linear readout."""

    def __init__(self, spec: ModelSpec, num_features: int = NUM_FEATURES):
        self.spec = spec
        self.num_features = num_features
        rng = np.random.default_rng(spec.seed)
        dims = [num_features, *spec.classical_widths]
        self.hidden = [DenseLayer.init(a, b, rng, Activation.RELU) for a, b in zip(dims[:-1], dims[1:])]
        self.to_angles = DenseLayer.init(dims[-1], QMLP_ANGLES, rng)
        self.qlayer = QuantumLayer(QMLP_ANGLES, spec.num_qubits, spec.ansatz_depth, rng)
        self.readout = DenseLayer.init(spec.num_qubits, spec.readout_classes, rng)

    def parameters(self):
        return [*stack_params(self.hidden), self.to_angles.weights, self.to_angles.bias, self.qlayer.theta, self.readout.weights, self.readout.bias]

    def angles(self, x, tape=None):
        h = run_stack(self.hidden, _check_features(x, self.num_features), tape)
        pre = dense_forward(self.to_angles, h, tape)
        return pre, squash(pre)

    def forward(self, x):
        _, angles = self.angles(x)
        return dense_forward(self.readout, self.qlayer.forward(angles))

    def loss_and_grads(self, x, y):
        tape = GradTape()
        pre, angles = self.angles(x, tape)
        res = self.qlayer.jacobians(angles, wrt_inputs=True)
        logits = dense_forward(self.readout, res.values, tape)
        loss, g = softmax_cross_entropy(logits, y)
        wr, br, dz = dense_backward(self.readout, g, tape)
        dtheta = np.einsum("bk,bkp->p", dz, res.params)
        dangles = np.einsum("bk,bki->bi", dz, res.inputs)
        wa, ba, dh = dense_backward(self.to_angles, dangles * squash_derivative(pre), tape)
        hidden_grads, _ = backprop_stack(self.hidden, dh, tape)
        return loss, [*hidden_grads, wa, ba, dtheta, wr, br]


class QuantumBackprop(Classifier):
    """Direct angle encoding -> ansatz -> <Z_j> -> linear readout.

    Circuit angles train by the shift rule, the readout by ordinary backprop.
    """

    def __init__(self, spec: ModelSpec, num_features: int = NUM_FEATURES):
        self.spec = spec
        self.num_features = num_features
        rng = np.random.default_rng(spec.seed)
        self.qlayer = QuantumLayer(num_features, spec.num_qubits, spec.ansatz_depth, rng)
        self.readout = DenseLayer.init(spec.num_qubits, spec.readout_classes, rng)

    def parameters(self):
        return [self.qlayer.theta, self.readout.weights, self.readout.bias]

    def forward(self, x):
        z = self.qlayer.forward(_check_features(x, self.num_features))
        return dense_forward(self.readout, z)

    def loss_and_grads(self, x, y):
        res = self.qlayer.jacobians(_check_features(x, self.num_features))
        tape = GradTape()
        logits = dense_forward(self.readout, res.values, tape)
        loss, g = softmax_cross_entropy(logits, y)
        wr, br, dz = dense_backward(self.readout, g, tape)
        dtheta = np.einsum("bk,bkp->p", dz, res.params)
        return loss, [dtheta, wr, br]


class BaselineQNN(Classifier):
    """Post-variational baseline: frozen random circuit features, trainable linear head.

    Features are <Z_j> for every qubit plus <Z_j Z_{j+1}> around the ring.
    Since the circuit never changes, features are cached per input row.
    """

    def __init__(self, spec: ModelSpec, num_features: int = NUM_FEATURES):
        self.spec = spec
        self.num_features = num_features
        rng = np.random.default_rng(spec.seed)
        n = spec.num_qubits
        self.qlayer = QuantumLayer(num_features, n, spec.ansatz_depth, rng, readout=z_readout(n) + ring_zz_readout(n))
        self.readout = DenseLayer.init(self.qlayer.num_outputs, spec.readout_classes, rng)
        self._cache: dict[bytes, np.ndarray] = {}

    @property
    def num_quantum_features(self) -> int:
        return self.qlayer.num_outputs

    def parameters(self):
        return [self.readout.weights, self.readout.bias]

    def frozen_parameters(self):
        return [self.qlayer.theta]

    def quantum_features(self, x) -> np.ndarray:
        x = _check_features(x, self.num_features)
        keys = [row.tobytes() for row in x]
        missing = [i for i, k in enumerate(keys) if k not in self._cache]
        if missing:
            feats = self.qlayer.forward(x[missing])
            for i, f in zip(missing, feats):
                self._cache[keys[i]] = f
        return np.stack([self._cache[k] for k in keys])

    def forward(self, x):
        return dense_forward(self.readout, self.quantum_features(x))

    def loss_and_grads(self, x, y):
        tape = GradTape()
        logits = dense_forward(self.readout, self.quantum_features(x), tape)
        loss, g = softmax_cross_entropy(logits, y)
        wr, br, _ = dense_backward(self.readout, g, tape)
        return loss, [wr, br]


class ClassicalMLP(Classifier):
    """ReLU hidden layers and a linear readout, trained by plain backprop."""

    def __init__(self, spec: ModelSpec, num_features: int = NUM_FEATURES):
        self.spec = spec
        self.num_features = num_features
        rng = np.random.default_rng(spec.seed)
        dims = [num_features, *spec.classical_widths]
        self.hidden = [DenseLayer.init(a, b, rng, Activation.RELU) for a, b in zip(dims[:-1], dims[1:])]
        self.readout = DenseLayer.init(dims[-1], spec.readout_classes, rng)

    def parameters(self):
        return stack_params(self.hidden + [self.readout])

    def forward(self, x):
        return run_stack(self.hidden + [self.readout], _check_features(x, self.num_features), None)

    def loss_and_grads(self, x, y):
        tape = GradTape()
        logits = run_stack(self.hidden + [self.readout], _check_features(x, self.num_features), tape)
        loss, g = softmax_cross_entropy(logits, y)
        grads, _ = backprop_stack(self.hidden + [self.readout], g, tape)
        return loss, grads


def qmlp_forward(model: QuantumMLP, features) -> np.ndarray:
    return _single(model, features)


def qbp_forward(model: QuantumBackprop, features) -> np.ndarray:
    return _single(model, features)


def baseline_qnn_forward(model: BaselineQNN, features) -> np.ndarray:
    return _single(model, features)


def _single(model, features):
    features = np.asarray(features, dtype=float)
    logits = model.forward(features)
    return logits[0] if features.ndim == 1 else logits
