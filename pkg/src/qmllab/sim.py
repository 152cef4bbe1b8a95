"""Dense statevector simulation of parametrized circuits.

Basis ordering is little-endian: qubit ``q`` is bit ``q`` of the basis index,
so qubit 0 is the least significant bit.

Everything here runs on *batches* of statevectors, an array of shape
``(batch, 2**n)``. The single-state functions (``run``, ``apply_gate``,
``expectation``...) are thin wrappers over the batched kernels, which is what
the models and the parameter-shift code use to push hundreds of shifted
circuits through numpy at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import ConfigurationError, ParameterBindingError, ShapeError

MAX_QUBITS = 14

# Upper bound on batch_rows * 2**n complex amplitudes held by one kernel call.
_CHUNK_AMPLITUDES = 1 << 21


class GateKind(str, Enum):
    H = "H"
    X = "X"
    Z = "Z"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    CZ = "CZ"


ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})
TWO_QUBIT = frozenset({GateKind.CNOT, GateKind.CZ})


@dataclass(frozen=True)
class Fixed:
    """A constant rotation angle in radians."""

    angle: float


@dataclass(frozen=True)
class Ref:
    """Angle taken from the trainable parameter vector."""

    index: int


@dataclass(frozen=True)
class Input:
    """Angle taken from the per-sample input (feature) vector."""

    index: int


ParamSource = Union[Fixed, Ref, Input]


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    wires: tuple
    param: ParamSource | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        wires = tuple(int(w) for w in self.wires)
        object.__setattr__(self, "wires", wires)
        arity = 2 if kind in TWO_QUBIT else 1
        if len(wires) != arity:
            raise ConfigurationError(f"{kind.value} acts on {arity} wire(s), got {wires}")
        if len(set(wires)) != len(wires):
            raise ConfigurationError(f"{kind.value} wires must be distinct, got {wires}")
        if any(w < 0 for w in wires):
            raise ConfigurationError(f"negative wire in {wires}")
        if kind in ROTATIONS:
            if not isinstance(self.param, (Fixed, Ref, Input)):
                raise ConfigurationError(f"{kind.value} needs exactly one parameter")
        elif self.param is not None:
            raise ConfigurationError(f"{kind.value} takes no parameter")


def _param(p) -> ParamSource:
    if isinstance(p, (Fixed, Ref, Input)):
        return p
    return Fixed(float(p))


def h(q):
    return Gate(GateKind.H, (q,))


def x(q):
    return Gate(GateKind.X, (q,))


def z(q):
    return Gate(GateKind.Z, (q,))


def rx(q, p):
    return Gate(GateKind.RX, (q,), _param(p))


def ry(q, p):
    return Gate(GateKind.RY, (q,), _param(p))


def rz(q, p):
    return Gate(GateKind.RZ, (q,), _param(p))


def cnot(control, target):
    return Gate(GateKind.CNOT, (control, target))


def cz(a, b):
    return Gate(GateKind.CZ, (a, b))


@dataclass
class Circuit:
    """An ordered gate program.

    ``Ref(k)`` angles index a trainable vector of length ``num_params``;
    ``Input(k)`` angles index a per-sample feature vector of length
    ``num_inputs``.
    """

    num_qubits: int
    gates: list = field(default_factory=list)
    num_params: int = 0
    num_inputs: int = 0

    def __post_init__(self):
        _check_qubits(self.num_qubits)
        self.gates = list(self.gates)
        self.validate()

    def validate(self) -> list[int]:
        """Check wires and parameter references; return unused parameter indices."""
        used = set()
        for pos, gate in enumerate(self.gates):
            if max(gate.wires) >= self.num_qubits:
                raise ShapeError(
                    f"gate {pos} ({gate.kind.value}) uses wire {max(gate.wires)} "
                    f"on a {self.num_qubits}-qubit circuit"
                )
            p = gate.param
            if isinstance(p, Ref):
                if not 0 <= p.index < self.num_params:
                    raise ParameterBindingError(
                        f"gate {pos} references parameter {p.index}, circuit has {self.num_params}"
                    )
                used.add(p.index)
            elif isinstance(p, Input):
                if not 0 <= p.index < self.num_inputs:
                    raise ParameterBindingError(
                        f"gate {pos} references input {p.index}, circuit has {self.num_inputs}"
                    )
        return [k for k in range(self.num_params) if k not in used]

    def append(self, gate: Gate) -> "Circuit":
        self.gates.append(gate)
        self.validate()
        return self

    @property
    def parametrized(self) -> list[tuple[int, Gate]]:
        """(position, gate) for every gate carrying an angle, in program order."""
        return [(i, g) for i, g in enumerate(self.gates) if g.param is not None]


@dataclass
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_qubits(self.num_qubits)
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.num_qubits:
            raise ShapeError(
                f"{self.num_qubits} qubits need {1 << self.num_qubits} amplitudes, got {amps.shape[0]}"
            )
        self.amplitudes = amps

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "Statevector":
        return Statevector(self.num_qubits, self.amplitudes.copy())


_PAULI_NAMES = ("X", "Y", "Z")


class Observable:
    """A real linear combination of Pauli strings.

    >>> Observable.z(0) + 0.5 * Observable.zz(0, 1)
    """

    def __init__(self, terms=()):
        clean = []
        for coeff, paulis in terms:
            coeff = float(coeff)
            paulis = {int(q): str(p).upper() for q, p in dict(paulis).items()}
            for q, p in paulis.items():
                if p not in _PAULI_NAMES:
                    raise ConfigurationError(f"unknown Pauli {p!r} on qubit {q}")
                if q < 0:
                    raise ShapeError(f"negative wire {q} in observable")
            clean.append((coeff, paulis))
        self.terms = tuple(clean)

    @classmethod
    def z(cls, q: int) -> "Observable":
        return cls([(1.0, {q: "Z"})])

    @classmethod
    def zz(cls, a: int, b: int) -> "Observable":
        return cls([(1.0, {a: "Z", b: "Z"})])

    @classmethod
    def pauli(cls, paulis: Mapping[int, str], coeff: float = 1.0) -> "Observable":
        return cls([(coeff, paulis)])

    def __add__(self, other: "Observable") -> "Observable":
        return Observable(self.terms + other.terms)

    def __mul__(self, c: float) -> "Observable":
        return Observable([(c * coeff, p) for coeff, p in self.terms])

    __rmul__ = __mul__

    @property
    def is_diagonal(self) -> bool:
        return all(p == "Z" for _, ps in self.terms for p in ps.values())

    @property
    def max_wire(self) -> int:
        return max((q for _, ps in self.terms for q in ps), default=-1)

    def __repr__(self):
        parts = []
        for c, ps in self.terms:
            s = "".join(f"{p}{q}" for q, p in sorted(ps.items())) or "I"
            parts.append(f"{c:g}*{s}")
        return f"Observable({' + '.join(parts)})"


def _check_qubits(n):
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_QUBITS:
        raise ConfigurationError(f"num_qubits must be in 1..{MAX_QUBITS}, got {n!r}")


# --------------------------------------------------------------------------
# batched kernels

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


@lru_cache(maxsize=None)
def _cz_signs(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    both = ((idx >> a) & 1) & ((idx >> b) & 1)
    return 1.0 - 2.0 * both


@lru_cache(maxsize=None)
def _z_signs(n: int, qubits: tuple) -> np.ndarray:
    idx = np.arange(1 << n)
    parity = np.zeros(1 << n, dtype=np.int64)
    for q in qubits:
        parity ^= (idx >> q) & 1
    return 1.0 - 2.0 * parity


def _split(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    # view with axis 2 selecting bit q
    return amps.reshape(amps.shape[0], 1 << (n - 1 - q), 2, 1 << q)


def _apply_single(amps, n, q, kind, theta):
    """Apply a one-qubit gate to every row. ``theta`` is (B,) or None."""
    psi = _split(amps, n, q)
    a0 = psi[:, :, 0, :]
    a1 = psi[:, :, 1, :]
    out = np.empty_like(psi)
    if kind is GateKind.X:
        out[:, :, 0, :] = a1
        out[:, :, 1, :] = a0
    elif kind is GateKind.Z:
        out[:, :, 0, :] = a0
        out[:, :, 1, :] = -a1
    elif kind is GateKind.H:
        out[:, :, 0, :] = (a0 + a1) * _H[0, 0]
        out[:, :, 1, :] = (a0 - a1) * _H[0, 0]
    else:
        half = (np.asarray(theta, dtype=np.float64) / 2.0)[:, None, None]
        if kind is GateKind.RZ:
            phase = np.exp(-1j * half)
            out[:, :, 0, :] = a0 * phase
            out[:, :, 1, :] = a1 * np.conj(phase)
        else:
            c, s = np.cos(half), np.sin(half)
            if kind is GateKind.RY:
                out[:, :, 0, :] = c * a0 - s * a1
                out[:, :, 1, :] = s * a0 + c * a1
            else:  # RX
                out[:, :, 0, :] = c * a0 - 1j * s * a1
                out[:, :, 1, :] = -1j * s * a0 + c * a1
    return out.reshape(amps.shape)


def _apply(amps, n, gate, theta):
    if gate.kind is GateKind.CNOT:
        return np.take(amps, _cnot_perm(n, *gate.wires), axis=1)
    if gate.kind is GateKind.CZ:
        return amps * _cz_signs(n, *gate.wires)
    return _apply_single(amps, n, gate.wires[0], gate.kind, theta)


def _as_rows(a, width, what):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != width:
        raise ParameterBindingError(f"{what} must have length {width}, got shape {a.shape}")
    return a


def resolve_angles(circuit: Circuit, params=None, inputs=None) -> np.ndarray:
    """Angles of every parametrized gate, shape ``(batch, n_parametrized)``.

    ``params`` is ``(P,)`` or ``(B, P)``; ``inputs`` is ``(I,)`` or ``(B, I)``.
    Leading batch dims of size 1 broadcast.
    """
    pgates = circuit.parametrized
    params = _as_rows(np.zeros(0) if params is None else params, circuit.num_params, "params")
    inputs = _as_rows(np.zeros(0) if inputs is None else inputs, circuit.num_inputs, "inputs")
    batch = max(params.shape[0], inputs.shape[0])
    for arr, what in ((params, "params"), (inputs, "inputs")):
        if arr.shape[0] not in (1, batch):
            raise ShapeError(f"{what} batch {arr.shape[0]} does not broadcast to {batch}")
    angles = np.empty((batch, len(pgates)))
    for col, (_, g) in enumerate(pgates):
        p = g.param
        if isinstance(p, Fixed):
            angles[:, col] = p.angle
        elif isinstance(p, Ref):
            angles[:, col] = params[:, p.index]
        else:
            angles[:, col] = inputs[:, p.index]
    return angles


def zero_states(num_qubits: int, batch: int = 1) -> np.ndarray:
    _check_qubits(num_qubits)
    amps = np.zeros((batch, 1 << num_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    return amps


def _gate_matrices(kind: GateKind, theta) -> np.ndarray:
    """Per-row 2x2 matrices, shape (B, 2, 2); ``theta`` is (B,) or None."""
    if kind is GateKind.H:
        return _H[None]
    if kind is GateKind.X:
        return np.array([[[0, 1], [1, 0]]], dtype=np.complex128)
    if kind is GateKind.Z:
        return np.array([[[1, 0], [0, -1]]], dtype=np.complex128)
    half = np.asarray(theta, dtype=np.float64) / 2.0
    m = np.zeros((half.shape[0], 2, 2), dtype=np.complex128)
    if kind is GateKind.RZ:
        m[:, 0, 0] = np.exp(-1j * half)
        m[:, 1, 1] = np.exp(1j * half)
        return m
    c, s = np.cos(half), np.sin(half)
    m[:, 0, 0] = c
    m[:, 1, 1] = c
    if kind is GateKind.RY:
        m[:, 0, 1] = -s
        m[:, 1, 0] = s
    else:
        m[:, 0, 1] = -1j * s
        m[:, 1, 0] = -1j * s
    return m


def _apply_matrix_numpy(amps, n, q, m):
    psi = _split(amps, n, q)
    if q >= 3:
        return np.matmul(m[:, None, :, :], psi).reshape(amps.shape)
    a0 = psi[:, :, 0, :]
    a1 = psi[:, :, 1, :]
    mm = m[:, :, :, None, None]
    out = np.empty_like(psi)
    o0 = out[:, :, 0, :]
    o1 = out[:, :, 1, :]
    np.multiply(a0, mm[:, 0, 0], out=o0)
    o0 += mm[:, 0, 1] * a1
    np.multiply(a0, mm[:, 1, 0], out=o1)
    o1 += mm[:, 1, 1] * a1
    return out.reshape(amps.shape)


def _matrix_kernel(amps, m, q):
    rows, size = amps.shape
    out = np.empty_like(amps)
    step = 1 << q
    shared = m.shape[0] == 1
    for b in range(rows):
        mb = 0 if shared else b
        m00 = m[mb, 0, 0]
        m01 = m[mb, 0, 1]
        m10 = m[mb, 1, 0]
        m11 = m[mb, 1, 1]
        for i in range(size):
            if i & step:
                continue
            j = i | step
            a0 = amps[b, i]
            a1 = amps[b, j]
            out[b, i] = m00 * a0 + m01 * a1
            out[b, j] = m10 * a0 + m11 * a1
    return out


try:
    import numba

    _matrix_kernel_jit = numba.njit(cache=True)(_matrix_kernel)
except ImportError:  # pragma: no cover - exercised only without numba
    _matrix_kernel_jit = None

_backend = "numba" if _matrix_kernel_jit is not None else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select the kernel for fused one-qubit matrices ("numba" or "numpy"); returns the old one."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ConfigurationError(f"unknown backend {name!r}")
    if name == "numba" and _matrix_kernel_jit is None:
        raise ConfigurationError("numba is not installed")
    old, _backend = _backend, name
    return old


def _apply_matrix(amps, n, q, m):
    if _backend == "numba":
        return _matrix_kernel_jit(np.ascontiguousarray(amps), np.ascontiguousarray(m), q)
    return _apply_matrix_numpy(amps, n, q, m)


def _compile(circuit: Circuit, from_zero: bool):
    """Split a circuit into a product-state prefix and a fused op list.

    Prefix: single-qubit gates that precede every multi-qubit gate (only when
    starting from |0...0>). After that, runs of single-qubit gates on a qubit
    are fused into one matrix and consecutive CNOTs into one permutation.
    Ops carry angle-column indices so angles are bound per call.
    """
    n = circuit.num_qubits
    prefix = []  # (qubit, kind, col)
    ops = []  # ("mat", qubit, [(kind, col), ...]) | ("perm", array) | ("diag", array)
    pending = {}
    perm = None
    col = 0
    in_prefix = from_zero

    def flush_perm():
        nonlocal perm
        if perm is not None:
            ops.append(("perm", perm))
            perm = None

    def flush_qubit(q):
        if q in pending:
            flush_perm()
            ops.append(("mat", q, pending.pop(q)))

    for gate in circuit.gates:
        c = None
        if gate.param is not None:
            c = col
            col += 1
        if gate.kind in TWO_QUBIT:
            in_prefix = False
            for q in gate.wires:
                flush_qubit(q)
            if gate.kind is GateKind.CNOT:
                p = _cnot_perm(n, *gate.wires)
                perm = p if perm is None else perm[p]
            else:
                flush_perm()
                ops.append(("diag", _cz_signs(n, *gate.wires)))
        elif in_prefix:
            prefix.append((gate.wires[0], gate.kind, c))
        else:
            pending.setdefault(gate.wires[0], []).append((gate.kind, c))
    flush_perm()
    for q in sorted(pending):
        ops.append(("mat", q, pending[q]))
    return prefix, ops


def _fused(seq, angles):
    m = None
    for kind, c in seq:
        g = _gate_matrices(kind, None if c is None else angles[:, c])
        m = g if m is None else np.matmul(g, m)
    return m


def _product_state(n, prefix, angles, rows):
    local = np.zeros((rows, n, 2), dtype=np.complex128)
    local[:, :, 0] = 1.0
    for q, kind, c in prefix:
        m = _gate_matrices(kind, None if c is None else angles[:, c])
        local[:, q] = np.einsum("bij,bj->bi", np.broadcast_to(m, (rows, 2, 2)), local[:, q])
    state = local[:, n - 1]
    for q in range(n - 2, -1, -1):
        state = (state[:, :, None] * local[:, q, None, :]).reshape(rows, -1)
    return state


def run_angles(circuit: Circuit, angles: np.ndarray, states: np.ndarray | None = None) -> np.ndarray:
    """Run ``circuit`` with explicit per-gate angles (see ``resolve_angles``).

    ``states`` defaults to ``|0...0>`` for every row; a single row broadcasts.
    """
    n = circuit.num_qubits
    angles = np.atleast_2d(np.asarray(angles, dtype=np.float64))
    batch = angles.shape[0]
    if states is not None:
        states = np.atleast_2d(np.asarray(states, dtype=np.complex128))
        if states.shape[1] != 1 << n:
            raise ShapeError(f"input state has {states.shape[1]} amplitudes, circuit needs {1 << n}")
        if states.shape[0] not in (1, batch):
            if batch != 1:
                raise ShapeError(f"state batch {states.shape[0]} vs angle batch {batch}")
            batch = states.shape[0]
            angles = np.broadcast_to(angles, (batch, angles.shape[1]))
        states = np.broadcast_to(states, (batch, 1 << n))

    prefix, ops = _compile(circuit, states is None)
    step = max(1, _CHUNK_AMPLITUDES >> n)
    out = np.empty((batch, 1 << n), dtype=np.complex128)
    for lo in range(0, batch, step):
        hi = min(batch, lo + step)
        ang = angles[lo:hi]
        if states is None:
            amps = _product_state(n, prefix, ang, hi - lo)
        else:
            amps = states[lo:hi].copy()
        for op in ops:
            if op[0] == "perm":
                amps = np.take(amps, op[1], axis=1)
            elif op[0] == "diag":
                amps = amps * op[1]
            else:
                amps = _apply_matrix(amps, n, op[1], _fused(op[2], ang))
        out[lo:hi] = amps
    return out


def simulate(circuit: Circuit, params=None, inputs=None, states=None) -> np.ndarray:
    """Batched run: returns amplitudes of shape ``(batch, 2**n)``."""
    return run_angles(circuit, resolve_angles(circuit, params, inputs), states)


def _apply_pauli_string(amps, n, paulis):
    out = amps
    idx = np.arange(1 << n)
    for q, p in paulis.items():
        bit = (idx >> q) & 1
        if p == "Z":
            out = out * (1.0 - 2.0 * bit)
        else:
            out = out[:, idx ^ (1 << q)]
            if p == "Y":
                # Y|0> = i|1>, Y|1> = -i|0>; after the flip, row index carries the new bit
                out = out * np.where(bit, 1j, -1j)
    return out


def expectation_values(amps: np.ndarray, observables: Sequence[Observable], n: int | None = None) -> np.ndarray:
    """Exact expectations, shape ``(batch, len(observables))``."""
    amps = np.atleast_2d(amps)
    if n is None:
        n = int(amps.shape[1]).bit_length() - 1
    out = np.zeros((amps.shape[0], len(observables)))
    probs = None
    for k, obs in enumerate(observables):
        if obs.max_wire >= n:
            raise ShapeError(f"observable acts on wire {obs.max_wire} of a {n}-qubit state")
        if obs.is_diagonal:
            if probs is None:
                probs = amps.real**2 + amps.imag**2
            diag = np.zeros(1 << n)
            for c, ps in obs.terms:
                diag += c * _z_signs(n, tuple(sorted(ps)))
            out[:, k] = probs @ diag
        else:
            for c, ps in obs.terms:
                phi = _apply_pauli_string(amps, n, ps)
                out[:, k] += c * np.einsum("bi,bi->b", amps.conj(), phi).real
    return out


def z_expectations(amps: np.ndarray, n: int) -> np.ndarray:
    """Per-qubit <Z_j>, shape ``(batch, n)``."""
    probs = amps.real**2 + amps.imag**2
    return probs @ np.stack([_z_signs(n, (q,)) for q in range(n)], axis=1)


# --------------------------------------------------------------------------
# single-state surface


def init_state(num_qubits: int) -> Statevector:
    """|0...0> on ``num_qubits`` qubits."""
    return Statevector(num_qubits, zero_states(num_qubits)[0])


def _angle_of(gate: Gate, params, inputs) -> float | None:
    p = gate.param
    if p is None:
        return None
    if isinstance(p, Fixed):
        return float(p.angle)
    source, what = (params, "parameter") if isinstance(p, Ref) else (inputs, "input")
    if source is None or not 0 <= p.index < len(source):
        raise ParameterBindingError(f"cannot resolve {what} {p.index} for {gate.kind.value}")
    return float(source[p.index])


def apply_gate(state: Statevector, gate: Gate, params=(), inputs=()) -> Statevector:
    n = state.num_qubits
    if max(gate.wires) >= n:
        raise ShapeError(f"{gate.kind.value} on wires {gate.wires} exceeds {n} qubits")
    theta = _angle_of(gate, params, inputs)
    amps = _apply(state.amplitudes[None, :], n, gate, None if theta is None else np.array([theta]))
    return Statevector(n, amps[0])


def run(circuit: Circuit, params=(), input: Statevector | None = None, inputs=()) -> Statevector:
    """Apply the circuit's gates in order to ``input`` (default |0...0>)."""
    if input is None:
        input = init_state(circuit.num_qubits)
    if input.num_qubits != circuit.num_qubits:
        raise ShapeError(f"state has {input.num_qubits} qubits, circuit has {circuit.num_qubits}")
    if len(params) != circuit.num_params:
        raise ParameterBindingError(f"expected {circuit.num_params} params, got {len(params)}")
    if len(inputs) != circuit.num_inputs:
        raise ParameterBindingError(f"expected {circuit.num_inputs} inputs, got {len(inputs)}")
    amps = simulate(circuit, np.asarray(params, float), np.asarray(inputs, float), input.amplitudes)
    return Statevector(circuit.num_qubits, amps[0])


def expectation(state: Statevector, obs: Observable) -> float:
    return float(expectation_values(state.amplitudes, [obs], state.num_qubits)[0, 0])


def probabilities(state: Statevector) -> np.ndarray:
    a = state.amplitudes
    return a.real**2 + a.imag**2
