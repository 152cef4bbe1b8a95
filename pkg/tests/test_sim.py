import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmllab.errors import ConfigurationError, ParameterBindingError, ShapeError
from qmllab.sim import (
    Circuit,
    Fixed,
    Gate,
    GateKind,
    Observable,
    Ref,
    Statevector,
    apply_gate,
    cnot,
    cz,
    expectation,
    expectation_values,
    h,
    init_state,
    probabilities,
    run,
    rx,
    ry,
    rz,
    simulate,
    x,
    z,
)

from oracles import dense_expectation, dense_unitary, pauli_matrix, random_circuit, random_state

INV_SQRT2 = 1 / math.sqrt(2)


@pytest.mark.parametrize("n, expected", [(1, [1, 0]), (2, [1, 0, 0, 0])])
def test_init_state(n, expected):
    assert np.array_equal(init_state(n).amplitudes, np.array(expected, dtype=complex))


@pytest.mark.parametrize("n", [0, 15, -1])
def test_init_state_rejects_out_of_range(n):
    with pytest.raises(ConfigurationError):
        init_state(n)


def test_hadamard_on_zero():
    out = apply_gate(init_state(1), h(0))
    assert np.allclose(out.amplitudes, [0.7071068, 0.7071068], atol=1e-7)


def test_ry_pi_flips():
    out = apply_gate(init_state(1), ry(0, math.pi))
    assert np.allclose(out.amplitudes, [0, 1], atol=1e-15)


def test_x_flips():
    assert np.array_equal(apply_gate(init_state(1), x(0)).amplitudes, [0, 1])


def test_rotation_conventions_match_exponentials():
    theta = 0.731
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    plus = Statevector(1, [INV_SQRT2, INV_SQRT2])
    assert np.allclose(apply_gate(init_state(1), ry(0, theta)).amplitudes, [c, s])
    assert np.allclose(apply_gate(init_state(1), rx(0, theta)).amplitudes, [c, -1j * s])
    assert np.allclose(apply_gate(plus, rz(0, theta)).amplitudes, INV_SQRT2 * np.array([c - 1j * s, c + 1j * s]))


def test_unresolved_ref_is_binding_error():
    with pytest.raises(ParameterBindingError):
        apply_gate(init_state(1), ry(0, Ref(2)), params=[0.1])


def test_gate_validation():
    with pytest.raises(ConfigurationError):
        Gate(GateKind.RY, (0,))
    with pytest.raises(ConfigurationError):
        Gate(GateKind.H, (0,), Fixed(0.2))
    with pytest.raises(ConfigurationError):
        Gate(GateKind.CNOT, (1, 1))
    with pytest.raises(ConfigurationError):
        Gate(GateKind.CZ, (0,))


def test_circuit_validation():
    with pytest.raises(ShapeError):
        Circuit(2, [h(2)])
    with pytest.raises(ParameterBindingError):
        Circuit(1, [ry(0, Ref(1))], num_params=1)
    c = Circuit(2, [ry(0, Ref(0)), rz(1, Ref(2))], num_params=4)
    assert c.validate() == [1, 3]


def test_empty_circuit_is_identity():
    rng = np.random.default_rng(0)
    psi = Statevector(3, random_state(rng, 3))
    assert np.array_equal(run(Circuit(3), input=psi).amplitudes, psi.amplitudes)


def test_bell_state():
    out = run(Circuit(2, [h(0), cnot(0, 1)]))
    assert np.allclose(out.amplitudes, [INV_SQRT2, 0, 0, INV_SQRT2], atol=1e-12)


def test_run_checks_qubit_count_and_param_length():
    c = Circuit(2, [ry(0, Ref(0))], num_params=1)
    with pytest.raises(ShapeError):
        run(c, [0.1], input=init_state(3))
    with pytest.raises(ParameterBindingError):
        run(c, [])


def test_seeded_three_qubit_circuit_matches_dense_oracle(backend):
    rng = np.random.default_rng(12)
    c = random_circuit(rng, 3, 12, num_params=4)
    params = rng.uniform(-math.pi, math.pi, 4)
    psi = random_state(rng, 3)
    got = run(c, params, Statevector(3, psi)).amplitudes
    want = dense_unitary(c, params) @ psi
    assert np.max(np.abs(got - want)) < 1e-10


def test_from_zero_path_matches_oracle(backend):
    # starting from |0...0> uses the product-state shortcut; check it separately
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 5):
        c = random_circuit(rng, n, 20)
        got = run(c).amplitudes
        want = dense_unitary(c)[:, 0]
        assert np.max(np.abs(got - want)) < 1e-10


def test_batched_simulate_matches_rows(backend):
    rng = np.random.default_rng(5)
    c = random_circuit(rng, 4, 30, num_params=3, num_inputs=2)
    params = rng.uniform(-3, 3, 3)
    inputs = rng.uniform(0, 3, (6, 2))
    batch = simulate(c, params, inputs)
    for i in range(6):
        want = dense_unitary(c, params, inputs[i])[:, 0]
        assert np.max(np.abs(batch[i] - want)) < 1e-10


def test_backends_agree():
    from qmllab import sim

    try:
        import numba  # noqa: F401
    except ImportError:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(8)
    c = random_circuit(rng, 7, 60, num_params=5)
    params = rng.uniform(-3, 3, 5)
    old = sim.set_backend("numpy")
    try:
        a = simulate(c, params)
        sim.set_backend("numba")
        b = simulate(c, params)
    finally:
        sim.set_backend(old)
    assert np.max(np.abs(a - b)) < 1e-12


def test_unknown_backend():
    from qmllab import sim

    with pytest.raises(ConfigurationError):
        sim.set_backend("gpu")


@pytest.mark.parametrize(
    "state, obs, expected",
    [
        (init_state(1), Observable.z(0), 1.0),
        (run(Circuit(1, [ry(0, math.pi / 3)])), Observable.z(0), 0.5),
        (run(Circuit(2, [h(0), cnot(0, 1)])), Observable.zz(0, 1), 1.0),
    ],
)
def test_expectation_examples(state, obs, expected):
    assert expectation(state, obs) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("theta", [0, math.pi / 6, math.pi / 4, math.pi / 2, math.pi])
def test_z_after_ry_is_cos(theta):
    assert abs(expectation(run(Circuit(1, [ry(0, theta)])), Observable.z(0)) - math.cos(theta)) < 1e-10


def test_general_pauli_expectations_match_oracle():
    rng = np.random.default_rng(21)
    n = 3
    psi = random_state(rng, n)
    obs = [
        Observable.pauli({0: "X"}),
        Observable.pauli({1: "Y"}),
        Observable.pauli({0: "Y", 2: "X"}, 0.5),
        Observable.pauli({0: "X", 1: "Y", 2: "Z"}, -1.5) + Observable.z(1),
        2.0 * Observable.zz(0, 2),
    ]
    got = expectation_values(psi[None, :], obs, n)[0]
    want = [dense_expectation(psi, o, n) for o in obs]
    assert np.allclose(got, want, atol=1e-12)


def test_observable_wire_out_of_range():
    with pytest.raises(ShapeError):
        expectation(init_state(2), Observable.z(2))


def test_observable_rejects_unknown_pauli():
    with pytest.raises(ConfigurationError):
        Observable.pauli({0: "W"})


def test_oracle_pauli_matrix_is_hermitian():
    obs = Observable.pauli({0: "Y", 1: "X"}) + Observable.z(0)
    m = pauli_matrix(obs, 2)
    assert np.allclose(m, m.conj().T)


def test_probabilities():
    assert np.allclose(probabilities(init_state(1)), [1, 0])
    assert np.allclose(probabilities(run(Circuit(1, [h(0)]))), [0.5, 0.5])
    rng = np.random.default_rng(4)
    p = probabilities(Statevector(5, random_state(rng, 5)))
    assert abs(p.sum() - 1) < 1e-9


def test_statevector_length_checked():
    with pytest.raises(ShapeError):
        Statevector(2, [1, 0, 0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 10), n_gates=st.integers(0, 200))
def test_norm_preserved(seed, n, n_gates):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, n_gates)
    out = run(c, input=Statevector(n, random_state(rng, n)))
    assert abs(out.norm() - 1) < 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), n_gates=st.integers(0, 16))
def test_oracle_equivalence_property(seed, n, n_gates):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, n_gates, num_params=2)
    params = rng.uniform(-4, 4, 2)
    psi = random_state(rng, n)
    got = run(c, params, Statevector(n, psi)).amplitudes
    assert np.max(np.abs(got - dense_unitary(c, params) @ psi)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(-10, 10))
def test_inverse_restores_state(seed, theta):
    rng = np.random.default_rng(seed)
    psi = Statevector(3, random_state(rng, 3))
    back = run(Circuit(3, [ry(1, theta), ry(1, -theta), cnot(2, 0), cnot(2, 0), cz(0, 1), cz(0, 1), z(2), z(2)]), input=psi)
    assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-10
