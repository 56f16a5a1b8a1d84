import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqa_noise.channels import NoiseSpec, insert_noise
from vqa_noise.circuit import (
    Circuit,
    DenseObservable,
    FixedGate,
    NoiseSite,
    QubitLimitError,
    Rotation,
    SpectralObservable,
    apply_rotation,
    basis_state,
    circuit_from_dict,
    circuit_to_dict,
    dumps,
    evolve_density,
    expectation,
    loads,
    pure_density,
    run_circuit,
)
from vqa_noise.harness import ToyModel, ToyModelSpec
from vqa_noise.pauli import PauliString

from conftest import random_circuit, random_density, random_hermitian, random_state

X0 = PauliString("X")
Z = DenseObservable(np.diag([1.0, -1.0]).astype(complex))


# --- apply_rotation -----------------------------------------------------------


def test_rotation_identity_angle():
    assert np.allclose(apply_rotation(basis_state(1), PauliString("Z"), 0.0), basis_state(1))


def test_rotation_x_pi():
    assert np.allclose(apply_rotation(basis_state(1), X0, np.pi), [0, -1j], atol=1e-15)


def test_rotation_xx_half_pi():
    out = apply_rotation(basis_state(2), PauliString("XX"), np.pi / 2)
    assert np.allclose(out, np.array([1, 0, 0, -1j]) / np.sqrt(2), atol=1e-15)


def test_rotation_out_of_range():
    with pytest.raises(IndexError):
        apply_rotation(basis_state(1), PauliString("XI"), 0.1)


angles = st.floats(-20, 20, allow_nan=False)
gens = st.sampled_from(["X", "Y", "Z", "XY", "ZZ", "YX"])


@given(gens, angles, st.integers(0, 2**31))
def test_rotation_periodicity(s, theta, seed):
    p = PauliString(s)
    psi = random_state(np.random.default_rng(seed), 2**p.n_qubits)
    assert np.allclose(apply_rotation(psi, p, theta + 4 * np.pi), apply_rotation(psi, p, theta),
                       atol=1e-12)


@given(gens, angles, st.integers(0, 2**31))
def test_pi_shift_composition(s, theta, seed):
    p = PauliString(s)
    psi = random_state(np.random.default_rng(seed), 2**p.n_qubits)
    lhs = apply_rotation(psi, p, theta + np.pi)
    rhs = apply_rotation(apply_rotation(psi, p, np.pi), p, theta)
    assert np.allclose(lhs, rhs, atol=1e-12)


# --- run_circuit ----------------------------------------------------------------


def test_empty_circuit_is_identity():
    psi = random_state(np.random.default_rng(0), 8)
    assert np.allclose(run_circuit(Circuit(3, []), state=psi), psi)


def test_rx_gives_cosine():
    c = Circuit(1, [Rotation(X0, 0)])
    for th in np.linspace(-3, 3, 7):
        assert expectation(run_circuit(c, [th]), Z) == pytest.approx(np.cos(th), abs=1e-14)


def test_toy_circuit_generates_orthonormal_eigenstates():
    m = ToyModel(ToyModelSpec())
    states = np.array([run_circuit(m.ansatz, m.theta_opt, state=basis_state(4, i)) for i in range(16)])
    assert np.allclose(states.conj() @ states.T, np.eye(16), atol=1e-12)


def test_zero_angles_and_no_fixed_gates_is_identity():
    c = Circuit(2, [Rotation(PauliString("XY"), 0), Rotation(PauliString("ZI"), 1)])
    psi = random_state(np.random.default_rng(1), 4)
    assert np.allclose(run_circuit(c, [0, 0], state=psi), psi)


def test_parameter_length_mismatch():
    c = Circuit(1, [Rotation(X0, 0)])
    with pytest.raises(ValueError):
        run_circuit(c, [0.1, 0.2])
    c2 = Circuit(1, [NoiseSite(X0, 0.1, 0)])
    with pytest.raises(ValueError):
        run_circuit(c2, [], virtual=[0.0, 0.0])


def test_gate_order_first_element_acts_first():
    # RY(pi/2) then CZ differs from CZ then RY(pi/2); list order must be honoured
    c = Circuit(2, [Rotation(PauliString("XI"), 0), FixedGate("CZ", (0, 1)),
                    Rotation(PauliString("IX"), 1)])
    u = lambda p, t: np.cos(t / 2) * np.eye(4) - 1j * np.sin(t / 2) * PauliString(p).matrix()  # noqa: E731
    cz = np.diag([1, 1, 1, -1])
    ref = u("IX", 0.4) @ cz @ u("XI", 1.1) @ basis_state(2)
    assert np.allclose(run_circuit(c, [1.1, 0.4]), ref)


def test_norm_preserved_on_random_circuits():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        c = random_circuit(rng, n, int(rng.integers(0, 6)))
        psi = run_circuit(c, rng.uniform(-7, 7, c.n_params), state=random_state(rng, 2**n))
        assert abs(np.linalg.norm(psi) - 1) < 1e-12


# --- circuit validation ----------------------------------------------------------


def test_slot_validation():
    with pytest.raises(ValueError):
        Circuit(1, [Rotation(X0, 1)])
    with pytest.raises(ValueError):
        Circuit(1, [Rotation(X0, 0), Rotation(X0, 0)])
    with pytest.raises(ValueError):
        Circuit(1, [Rotation(PauliString("I"), 0)])
    with pytest.raises(IndexError):
        Circuit(2, [FixedGate("CZ", (0, 2))])


def test_fixed_gate_unitarity():
    with pytest.raises(ValueError):
        FixedGate("bad", (0,), np.array([[1, 0], [0, 1.0 + 1e-9]]))
    FixedGate("ok", (0,), np.array([[0, 1], [1, 0]]))


# --- expectation / observables ---------------------------------------------------


def test_expectation_basics():
    assert expectation(basis_state(1), Z) == 1.0


def test_toy_ground_state_energy():
    m = ToyModel(ToyModelSpec())
    psi0 = run_circuit(m.ansatz, m.theta_opt)
    assert expectation(psi0, m.hamiltonian) == pytest.approx(1.0, abs=1e-12)


def test_dense_and_spectral_forms_agree():
    rng = np.random.default_rng(3)
    for _ in range(20):
        c = random_circuit(rng, 3, 4)
        theta = rng.uniform(0, 2 * np.pi, 4)
        energies = np.sort(rng.normal(size=8))
        spec = SpectralObservable(energies, c, theta)
        dense = DenseObservable(spec.to_dense())
        psi = random_state(rng, 8)
        assert abs(expectation(psi, spec) - expectation(psi, dense)) < 1e-10
        rho = random_density(rng, 8)
        assert abs(expectation(rho, spec) - expectation(rho, dense)) < 1e-10
        assert np.allclose(dense.spectrum, energies, atol=1e-10)


def test_expectation_within_spectrum():
    rng = np.random.default_rng(4)
    obs = DenseObservable(random_hermitian(rng, 8))
    lo, hi = obs.spectrum[0], obs.spectrum[-1]
    for _ in range(100):
        v = expectation(random_state(rng, 8), obs)
        assert lo - 1e-12 <= v <= hi + 1e-12


def test_observable_validation():
    with pytest.raises(ValueError):
        DenseObservable(np.array([[0, 1], [0, 0]], dtype=complex))
    c = Circuit(1, [Rotation(X0, 0)])
    with pytest.raises(ValueError):
        SpectralObservable(np.array([1.0, 0.0]), c, [0.0])
    with pytest.raises(ValueError):
        expectation(basis_state(2), Z)


# --- evolve_density --------------------------------------------------------------


def test_density_identity_circuit():
    rho = random_density(np.random.default_rng(0), 4)
    assert np.allclose(evolve_density(rho, Circuit(2, [])), rho)


def test_density_matches_statevector_noiseless():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        c = random_circuit(rng, n, 5)
        theta = rng.uniform(0, 2 * np.pi, 5)
        psi0 = random_state(rng, 2**n)
        rho = evolve_density(pure_density(psi0), c, theta)
        assert np.max(np.abs(rho - pure_density(run_circuit(c, theta, state=psi0)))) < 1e-12


def test_density_invariants_with_noise():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        c = random_circuit(rng, n, 4, n_noise=5, p_max=0.4)
        rho = evolve_density(random_density(rng, 2**n), c, rng.uniform(0, 6, 4))
        assert np.allclose(rho, rho.conj().T, atol=1e-12)
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_single_qubit_depolarizing_bloch_shrink():
    q = 0.03
    noisy, _ = insert_noise(Circuit(1, []), NoiseSpec(q_readout=q))
    rho = evolve_density(pure_density(basis_state(1)), noisy)
    assert expectation(rho, Z) == pytest.approx(1 - 4 * q / 3, abs=1e-14)


def test_density_qubit_cap():
    with pytest.raises(QubitLimitError):
        evolve_density(np.eye(8) / 8, Circuit(3, []), max_qubits=2)


def test_commuting_channels_reorder_invariant():
    rng = np.random.default_rng(8)
    a = NoiseSite(PauliString("XI"), 0.1, 0)
    b = NoiseSite(PauliString("IZ"), 0.2, 1)
    rot = Rotation(PauliString("YY"), 0)
    rho = random_density(rng, 4)
    r1 = evolve_density(rho, Circuit(2, [rot, a, b]), [0.3])
    r2 = evolve_density(rho, Circuit(2, [rot, b, a]), [0.3])
    assert np.allclose(r1, r2, atol=1e-14)


# --- serialization ---------------------------------------------------------------


def test_json_round_trip():
    rng = np.random.default_rng(9)
    c = random_circuit(rng, 3, 4, n_fixed=3, n_noise=2)
    back = loads(dumps(c))
    theta = rng.uniform(0, 6, 4)
    rho = random_density(rng, 8)
    assert np.allclose(evolve_density(rho, back, theta), evolve_density(rho, c, theta), atol=1e-14)
    doc = json.loads(dumps(c))
    assert circuit_to_dict(circuit_from_dict(doc)) == doc
    kinds = {g["kind"] for g in doc["gates"]}
    assert kinds <= {"rotation", "fixed", "noise"}
    rot = next(g for g in doc["gates"] if g["kind"] == "rotation")
    assert set(rot) == {"kind", "generator", "qubits", "param_slot"}
