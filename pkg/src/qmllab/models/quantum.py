"""Angle encoding, the hardware-efficient ansatz and the QuantumLayer wrapper."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from ..gradients import ShiftResult, shift_jacobian
from ..sim import Circuit, Input, Observable, Ref, cnot, expectation_values, ry, rz, simulate, z_expectations


def encode_features(features, num_qubits: int) -> Circuit:
    """Fixed-angle encoding prefix: feature 2j -> RY on qubit j, 2j+1 -> RZ on qubit j.

    Missing features encode as angle 0.
    """
    features = np.asarray(features, dtype=float).reshape(-1)
    if features.size > 2 * num_qubits:
        raise ShapeError(f"{features.size} features exceed the {2 * num_qubits}-angle capacity of {num_qubits} qubits")
    padded = np.zeros(2 * num_qubits)
    padded[: features.size] = features
    gates = []
    for j in range(num_qubits):
        gates += [ry(j, padded[2 * j]), rz(j, padded[2 * j + 1])]
    return Circuit(num_qubits, gates)


def encoding_gates(num_inputs: int, num_qubits: int) -> list:
    """Input-bound encoding using the same placement rule.

    Inputs beyond ``2 * num_qubits`` wrap around in further blocks, so a
    16-feature vector still fits on fewer than 8 qubits.
    """
    gates = []
    cap = 2 * num_qubits
    for start in range(0, num_inputs, cap):
        for j in range(num_qubits):
            for off, gate in ((0, ry), (1, rz)):
                k = start + 2 * j + off
                if k < num_inputs:
                    gates.append(gate(j, Input(k)))
    return gates


def ansatz_gates(num_qubits: int, depth: int, offset: int = 0) -> list:
    """``depth`` repetitions of [RY per qubit, RZ per qubit, CNOT ring]."""
    gates = []
    k = offset
    for _ in range(depth):
        for j in range(num_qubits):
            gates.append(ry(j, Ref(k)))
            k += 1
        for j in range(num_qubits):
            gates.append(rz(j, Ref(k)))
            k += 1
        for j in range(num_qubits):
            gates.append(cnot(j, (j + 1) % num_qubits))
    return gates


def layer_circuit(num_inputs: int, num_qubits: int, depth: int) -> Circuit:
    gates = encoding_gates(num_inputs, num_qubits) + ansatz_gates(num_qubits, depth)
    return Circuit(num_qubits, gates, num_params=2 * num_qubits * depth, num_inputs=num_inputs)


def z_readout(num_qubits: int) -> list:
    return [Observable.z(j) for j in range(num_qubits)]


def ring_zz_readout(num_qubits: int) -> list:
    return [Observable.zz(j, (j + 1) % num_qubits) for j in range(num_qubits)]


class QuantumLayer:
    """Encoding block + ansatz, read out as a vector of Pauli expectations.

    ``theta`` holds ``2 * num_qubits * depth`` angles and is trained in place.
    """

    def __init__(self, num_inputs: int, num_qubits: int, depth: int, rng: np.random.Generator | None = None, readout=None):
        self.num_inputs = num_inputs
        self.num_qubits = num_qubits
        self.depth = depth
        self.circuit = layer_circuit(num_inputs, num_qubits, depth)
        n_theta = self.circuit.num_params
        if rng is None:
            self.theta = np.zeros(n_theta)
        else:
            self.theta = rng.uniform(-math.pi, math.pi, size=n_theta)
        self.readout = list(readout) if readout is not None else z_readout(num_qubits)
        self._z_only = readout is None

    @property
    def num_outputs(self) -> int:
        return len(self.readout)

    def _check(self, angles):
        angles = np.atleast_2d(np.asarray(angles, dtype=float))
        if angles.shape[1] != self.num_inputs:
            raise ShapeError(f"quantum layer expects {self.num_inputs} angles, got {angles.shape[1]}")
        return angles

    def forward(self, angles) -> np.ndarray:
        """Readout expectations, shape ``(batch, num_outputs)``."""
        angles = self._check(angles)
        amps = simulate(self.circuit, self.theta, angles)
        if self._z_only:
            return z_expectations(amps, self.num_qubits)
        return expectation_values(amps, self.readout, self.num_qubits)

    def jacobians(self, angles, wrt_inputs: bool = False, wrt_params: bool = True) -> ShiftResult:
        angles = self._check(angles)
        return shift_jacobian(
            self.circuit, self.readout, self.theta, angles, wrt_params=wrt_params, wrt_inputs=wrt_inputs
        )
