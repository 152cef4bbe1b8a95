"""Gradients: parameter-shift for circuits, backprop for dense layers.

The parameter-shift rule differentiates every rotation occurrence separately
(``[E(a + pi/2) - E(a - pi/2)] / 2``) and sums occurrences that share a
parameter, so it is exact for any circuit built from RX/RY/RZ angles. The
same rule applied to ``Input`` angles gives gradients with respect to the
encoded features, which is how classical layers upstream of a quantum layer
receive their error signal.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError, StateError, UnsupportedGateError
from .sim import (
    ROTATIONS,
    Circuit,
    Input,
    Observable,
    Ref,
    Statevector,
    expectation_values,
    resolve_angles,
    run_angles,
    simulate,
)

SHIFT = math.pi / 2
_shift = SHIFT


def shift_constant() -> float:
    return _shift


@contextlib.contextmanager
def override_shift(value: float):
    """Temporarily change the shift used by the shift rule.

    Debug hook for negative-control gradient checks: anything other than
    ``pi/2`` yields wrong gradients, and the checkers should notice.
    """
    global _shift
    old, _shift = _shift, float(value)
    try:
        yield
    finally:
        _shift = old


def _occurrences(circuit: Circuit, source) -> list[tuple[int, int]]:
    """(angle column, vector index) for each gate whose angle comes from ``source``."""
    occ = []
    for col, (pos, gate) in enumerate(circuit.parametrized):
        if isinstance(gate.param, source):
            if gate.kind not in ROTATIONS:
                raise UnsupportedGateError(
                    f"gate {pos} ({gate.kind.value}) is not a single-qubit rotation; "
                    "the shift rule does not apply"
                )
            occ.append((col, gate.param.index))
    return occ


@dataclass
class ShiftResult:
    """Output of a batched shift-rule evaluation for ``S`` samples and ``K`` observables."""

    values: np.ndarray  # (S, K) unshifted expectations
    params: np.ndarray | None  # (S, K, num_params)
    inputs: np.ndarray | None  # (S, K, num_inputs)


def shift_jacobian(
    circuit: Circuit,
    observables: Sequence[Observable],
    params=None,
    inputs=None,
    *,
    wrt_params: bool = True,
    wrt_inputs: bool = False,
    states=None,
) -> ShiftResult:
    """Expectations and their shift-rule Jacobians for a batch of samples.

    All ``2 * occurrences + 1`` circuits per sample run as one numpy batch.
    """
    base = resolve_angles(circuit, params, inputs)
    s_count, g_count = base.shape
    p_occ = _occurrences(circuit, Ref) if wrt_params else []
    i_occ = _occurrences(circuit, Input) if wrt_inputs else []
    occ = p_occ + i_occ
    rows = 2 * len(occ) + 1

    shifted = np.repeat(base[:, None, :], rows, axis=1)
    s = _shift
    for i, (col, _) in enumerate(occ):
        shifted[:, 1 + 2 * i, col] += s
        shifted[:, 2 + 2 * i, col] -= s

    if states is not None:
        states = np.atleast_2d(states)
        if states.shape[0] == s_count and s_count > 1:
            states = np.repeat(states, rows, axis=0)
    amps = run_angles(circuit, shifted.reshape(s_count * rows, g_count), states)
    ev = expectation_values(amps, observables, circuit.num_qubits).reshape(s_count, rows, -1)

    diffs = (ev[:, 1::2, :] - ev[:, 2::2, :]) / 2.0  # (S, occ, K)
    jac_p = jac_i = None
    if wrt_params:
        jac_p = np.zeros((s_count, ev.shape[2], circuit.num_params))
        for i, (_, idx) in enumerate(p_occ):
            jac_p[:, :, idx] += diffs[:, i, :]
    if wrt_inputs:
        jac_i = np.zeros((s_count, ev.shape[2], circuit.num_inputs))
        off = len(p_occ)
        for i, (_, idx) in enumerate(i_occ):
            jac_i[:, :, idx] += diffs[:, off + i, :]
    return ShiftResult(ev[:, 0, :], jac_p, jac_i)


def _state_rows(input: Statevector | None):
    return None if input is None else input.amplitudes[None, :]


def param_shift_grad(circuit: Circuit, obs: Observable, params, input: Statevector | None = None, inputs=None) -> np.ndarray:
    """Exact gradient of ``<obs>`` with respect to the circuit parameters."""
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.num_params,):
        raise ShapeError(f"expected {circuit.num_params} params, got shape {params.shape}")
    res = shift_jacobian(circuit, [obs], params, inputs, states=_state_rows(input))
    return res.params[0, 0]


def hybrid_input_grad(circuit: Circuit, obs: Observable, params, encoded_input_angles, input: Statevector | None = None) -> np.ndarray:
    """Exact gradient of ``<obs>`` with respect to the encoded input angles."""
    angles = np.asarray(encoded_input_angles, dtype=float)
    if angles.shape != (circuit.num_inputs,):
        raise ShapeError(f"expected {circuit.num_inputs} input angles, got shape {angles.shape}")
    res = shift_jacobian(
        circuit, [obs], params, angles, wrt_params=False, wrt_inputs=True, states=_state_rows(input)
    )
    return res.inputs[0, 0]


def finite_diff_grad(
    circuit: Circuit,
    obs: Observable,
    params,
    input: Statevector | None = None,
    epsilon: float = 1e-5,
    inputs=None,
    wrt: str = "params",
) -> np.ndarray:
    """Central finite differences of ``<obs>``; the testing oracle for the shift rule."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    params = np.asarray(params, dtype=float)
    inputs = np.zeros(0) if inputs is None else np.asarray(inputs, dtype=float)
    target = params if wrt == "params" else inputs
    m = target.shape[0]
    rows = np.repeat(target[None, :], 2 * m, axis=0)
    for k in range(m):
        rows[2 * k, k] += epsilon
        rows[2 * k + 1, k] -= epsilon
    if wrt == "params":
        amps = simulate(circuit, rows, inputs if circuit.num_inputs else None, _state_rows(input))
    else:
        amps = simulate(circuit, params, rows, _state_rows(input))
    ev = expectation_values(amps, [obs], circuit.num_qubits)[:, 0]
    return (ev[0::2] - ev[1::2]) / (2 * epsilon)


# --------------------------------------------------------------------------
# dense layers


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"

    def __call__(self, z):
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.TANH:
            return np.tanh(z)
        return z

    def derivative(self, z):
        if self is Activation.RELU:
            return (z > 0).astype(float)  # 0 at z == 0
        if self is Activation.TANH:
            return 1.0 - np.tanh(z) ** 2
        return np.ones_like(z)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        self.activation = Activation(self.activation)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(f"weights {self.weights.shape} vs bias {self.bias.shape}")

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator, activation=Activation.IDENTITY):
        """Fan-in scaled uniform weights, zero bias."""
        bound = 1.0 / math.sqrt(n_in)
        return cls(rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(n_out), activation)

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]


@dataclass
class _Record:
    layer: DenseLayer
    x: np.ndarray
    pre: np.ndarray


@dataclass
class GradTape:
    """Inputs and pre-activations cached by ``dense_forward`` for ``dense_backward``."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)


def dense_forward(layer: DenseLayer, x, tape: GradTape | None = None) -> np.ndarray:
    """``activation(W x + b)`` for a vector or a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.n_in:
        raise ShapeError(f"layer expects {layer.n_in} inputs, got {x.shape[-1]}")
    pre = x @ layer.weights.T + layer.bias
    if tape is not None:
        tape.records.append(_Record(layer, x, pre))
    return layer.activation(pre)


def dense_backward(layer: DenseLayer, upstream, tape: GradTape):
    """Pop the layer's record and return ``(weight_grad, bias_grad, input_grad)``.

    For batched input the parameter gradients are summed over rows.
    """
    if not tape.records:
        raise StateError("gradient tape is empty")
    rec = tape.records[-1]
    if rec.layer is not layer:
        raise StateError("tape record belongs to a different layer")
    upstream = np.asarray(upstream, dtype=float)
    if upstream.shape != rec.pre.shape:
        raise ShapeError(f"upstream shape {upstream.shape} vs output {rec.pre.shape}")
    tape.records.pop()
    delta = upstream * layer.activation.derivative(rec.pre)
    if delta.ndim == 1:
        wg = np.outer(delta, rec.x)
        bg = delta.copy()
    else:
        wg = delta.T @ rec.x
        bg = delta.sum(axis=0)
    return wg, bg, delta @ layer.weights


# --------------------------------------------------------------------------
# generic checking


def finite_difference(f: Callable[[np.ndarray], float], x, epsilon: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        old = x[k]
        x[k] = old + epsilon
        fp = f(x)
        x[k] = old - epsilon
        fm = f(x)
        x[k] = old
        g[k] = (fp - fm) / (2 * epsilon)
    return g


@dataclass
class GradCheck:
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.analytic - self.numeric)

    @property
    def rel_err(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.analytic), np.abs(self.numeric))
        return np.where(scale > 0, self.abs_err / np.where(scale > 0, scale, 1.0), 0.0)

    @property
    def max_abs(self) -> float:
        return float(self.abs_err.max(initial=0.0))

    @property
    def max_rel(self) -> float:
        return float(self.rel_err.max(initial=0.0))

    @property
    def worst_index(self) -> int:
        return int(np.argmax(self.abs_err)) if self.abs_err.size else -1

    @property
    def count(self) -> int:
        return int(self.analytic.size)

    def passes(self, atol: float) -> bool:
        return self.max_abs < atol

    def passes_mixed(self, rtol: float, atol: float, floor: float = 1e-6) -> bool:
        """Relative tolerance where |grad| > floor, absolute tolerance elsewhere."""
        big = np.abs(self.numeric) > floor
        ok_rel = self.rel_err[big] <= rtol
        ok_abs = self.abs_err[~big] <= atol
        return bool(ok_rel.all() and ok_abs.all())
