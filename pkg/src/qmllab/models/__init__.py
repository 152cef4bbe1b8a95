"""Model families behind one interface, plus gradient-check helpers."""

from __future__ import annotations

import numpy as np

from ..data import overlay_label, wrong_labels
from ..errors import ConfigurationError
from ..gradients import GradCheck, finite_difference
from ..losses import ff_loss, softmax_cross_entropy
from .base import Classifier, Model
from .classifiers import (
    BaselineQNN,
    ClassicalMLP,
    QuantumBackprop,
    QuantumMLP,
    baseline_qnn_forward,
    qbp_forward,
    qmlp_forward,
    squash,
)
from .ff import (
    ClassicalForwardForward,
    FfLayerState,
    ForwardForwardModel,
    QuantumForwardForward,
    ff_predict,
    ff_train_step,
    goodness,
)
from .quantum import QuantumLayer, encode_features
from .spec import ModelKind, ModelSpec, default_spec, parse_kind

_REGISTRY = {
    ModelKind.QMLP: QuantumMLP,
    ModelKind.QFF: QuantumForwardForward,
    ModelKind.QBP: QuantumBackprop,
    ModelKind.BASELINE_QNN: BaselineQNN,
    ModelKind.CLASSICAL_MLP: ClassicalMLP,
    ModelKind.CLASSICAL_FF: ClassicalForwardForward,
}


def build_model(spec: ModelSpec, num_features: int = 16) -> Model:
    """Deterministically instantiate ``spec``; the same spec always yields the same parameters."""
    if not isinstance(spec, ModelSpec):
        raise ConfigurationError(f"expected a ModelSpec, got {type(spec).__name__}")
    spec.validate()
    return _REGISTRY[spec.kind](spec, num_features=num_features)


def quantum_layers(model: Model) -> list[QuantumLayer]:
    if isinstance(model, ForwardForwardModel):
        return [s.layer for s in model.layers if s.is_quantum]
    layer = getattr(model, "qlayer", None)
    return [layer] if layer is not None else []


def check_quantum_layer(layer: QuantumLayer, angles, epsilon: float = 1e-5) -> dict[str, GradCheck]:
    """Shift-rule Jacobians of every readout versus central differences.

    Covers both the trainable angles and the encoded input angles.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    res = layer.jacobians(angles, wrt_inputs=True)
    theta0 = layer.theta.copy()

    def out_theta(v):
        layer.theta[...] = v
        return layer.forward(angles)

    num_p = np.empty_like(res.params)
    for k in range(theta0.size):
        v = theta0.copy()
        v[k] += epsilon
        plus = out_theta(v)
        v[k] -= 2 * epsilon
        minus = out_theta(v)
        num_p[:, :, k] = (plus - minus) / (2 * epsilon)
    layer.theta[...] = theta0

    num_i = np.empty_like(res.inputs)
    for k in range(angles.shape[1]):
        a = angles.copy()
        a[:, k] += epsilon
        plus = layer.forward(a)
        a[:, k] -= 2 * epsilon
        minus = layer.forward(a)
        num_i[:, :, k] = (plus - minus) / (2 * epsilon)
    return {
        "circuit_params": GradCheck(res.params.ravel(), num_p.ravel()),
        "encoding_angles": GradCheck(res.inputs.ravel(), num_i.ravel()),
    }


def ff_layer_batches(model: ForwardForwardModel, x, y, rng: np.random.Generator):
    """Positive/negative inputs seen by each FF layer for a labelled batch."""
    pos = overlay_label(x, y)
    neg = overlay_label(x, wrong_labels(y, rng, model.spec.readout_classes))
    out = []
    for layer in model.layers:
        out.append((pos, neg))
        pos = layer.next_input(layer.activities(pos))
        neg = layer.next_input(layer.activities(neg))
    return out


def check_model_gradients(model: Model, x, y, epsilon: float = 1e-5, seed: int = 0) -> dict[str, GradCheck]:
    """Compare every analytic gradient the model uses in training with finite differences."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    checks: dict[str, GradCheck] = {}
    if isinstance(model, Classifier):
        _, grads = model.loss_and_grads(x, y)
        flat0 = model.get_flat()

        def loss_at(v):
            model.set_flat(v)
            return softmax_cross_entropy(model.forward(x), y)[0]

        numeric = finite_difference(loss_at, flat0, epsilon)
        model.set_flat(flat0)
        checks["loss"] = GradCheck(np.concatenate([g.ravel() for g in grads]), numeric)
    elif isinstance(model, ForwardForwardModel):
        rng = np.random.default_rng(seed)
        for k, (layer, (pos, neg)) in enumerate(zip(model.layers, ff_layer_batches(model, x, y, rng))):
            _, grads = layer.loss_and_grads(pos, neg)
            params = layer.params()
            flat0 = np.concatenate([p.ravel() for p in params])

            def loss_at(v, layer=layer, params=params, pos=pos, neg=neg):
                i = 0
                for p in params:
                    p[...] = v[i : i + p.size].reshape(p.shape)
                    i += p.size
                return layer.loss_and_grads(pos, neg)[0]

            numeric = finite_difference(loss_at, flat0, epsilon)
            loss_at(flat0)
            checks[f"ff_layer_{k}"] = GradCheck(np.concatenate([g.ravel() for g in grads]), numeric)

    rng = np.random.default_rng(seed + 1)
    for k, layer in enumerate(quantum_layers(model)):
        angles = rng.uniform(0, np.pi, size=(2, layer.num_inputs))
        for name, chk in check_quantum_layer(layer, angles, epsilon).items():
            checks[f"qlayer_{k}_{name}"] = chk
    return checks


__all__ = [
    "BaselineQNN",
    "Classifier",
    "ClassicalForwardForward",
    "ClassicalMLP",
    "FfLayerState",
    "ForwardForwardModel",
    "Model",
    "ModelKind",
    "ModelSpec",
    "QuantumBackprop",
    "QuantumForwardForward",
    "QuantumLayer",
    "QuantumMLP",
    "baseline_qnn_forward",
    "build_model",
    "check_model_gradients",
    "check_quantum_layer",
    "default_spec",
    "encode_features",
    "ff_loss",
    "ff_predict",
    "ff_train_step",
    "goodness",
    "parse_kind",
    "qbp_forward",
    "qmlp_forward",
    "quantum_layers",
    "squash",
]
