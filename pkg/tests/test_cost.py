import math

import numpy as np
import pytest

from vqa_noise.channels import NoiseSpec, VirtualParameterRegistry, RegistryEntry, stochastic_of_variance
from vqa_noise.circuit import Circuit, DenseObservable, NoiseSite, QubitLimitError, Rotation, basis_state
from vqa_noise.cost import (
    CostFunction,
    NoisyEvaluator,
    eval_cost,
    eval_noisy_cost,
    fubini_diag,
    fubini_diags,
    gradient,
    second_derivative,
    second_derivatives,
)
from vqa_noise.harness import ToyModel, ToyModelSpec, optimize
from vqa_noise.pauli import PauliString

from conftest import random_circuit, random_dense_observable, random_state

X = PauliString("X")
Zobs = DenseObservable(np.diag([1.0, -1.0]).astype(complex))
Xobs = DenseObservable(X.matrix())
PLUS = np.array([1, 1]) / np.sqrt(2)


def rx_cost():
    return CostFunction(Circuit(1, [Rotation(X, 0)]), [(Zobs, basis_state(1))])


def gaussian_cosine(s2):
    """RX then a Gaussian X-rotation of variance s2; H = Z on |0>."""
    p = stochastic_of_variance(s2)
    c = Circuit(1, [Rotation(X, 0), NoiseSite(X, p, 0)])
    reg = VirtualParameterRegistry((RegistryEntry(0, 1, X, s2, p, "parameter", 1, None, 0),))
    return NoisyEvaluator(CostFunction(c, [(Zobs, basis_state(1))]), reg)


def random_cost(rng, n=3, m=5, n_noise=0):
    c = random_circuit(rng, n, m, n_noise=n_noise)
    return CostFunction(c, [(random_dense_observable(rng, n), random_state(rng, 2**n))])


# --- eval_cost ------------------------------------------------------------------


def test_toy_model_at_planted_optimum():
    m = ToyModel(ToyModelSpec())
    cf, _ = m.cost()
    assert eval_cost(cf, m.theta_opt) == pytest.approx(1.0, abs=1e-12)


def test_rz_on_plus_gives_cosine():
    cf = CostFunction(Circuit(1, [Rotation(PauliString("Z"), 0)]), [(Xobs, PLUS)])
    for th in np.linspace(-3, 3, 9):
        assert eval_cost(cf, [th]) == pytest.approx(math.cos(th), abs=1e-14)


def test_duplicate_terms_add():
    rng = np.random.default_rng(0)
    cf = random_cost(rng)
    obs, phi = cf.terms[0]
    double = CostFunction(cf.circuit, [(obs, phi), (obs, phi)])
    th = rng.uniform(0, 6, cf.n_params)
    assert eval_cost(double, th) == pytest.approx(2 * eval_cost(cf, th), abs=1e-13)


def test_cost_bounded_by_spectrum():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = 2
        c = random_circuit(rng, n, 4)
        terms = [(random_dense_observable(rng, n), random_state(rng, 4)) for _ in range(2)]
        cf = CostFunction(c, terms)
        lo = sum(r[0] for r in cf.term_ranges())
        hi = sum(r[1] for r in cf.term_ranges())
        v = eval_cost(cf, rng.uniform(0, 6, 4))
        assert lo - 1e-12 <= v <= hi + 1e-12


def test_cost_validation():
    c = Circuit(1, [Rotation(X, 0)])
    with pytest.raises(ValueError):
        CostFunction(c, [])
    with pytest.raises(ValueError):
        CostFunction(c, [(Zobs, np.array([1.0, 1.0]))])
    with pytest.raises(ValueError):
        CostFunction(c, [(Zobs, basis_state(2))])


# --- eval_noisy_cost -----------------------------------------------------------


def test_zero_noise_matches_noiseless():
    rng = np.random.default_rng(2)
    cf = random_cost(rng)
    ev = NoisyEvaluator(cf)
    th = rng.uniform(0, 6, cf.n_params)
    val, se = eval_noisy_cost(ev, th)
    assert val == pytest.approx(eval_cost(cf, th), abs=1e-13) and se == 0.0


@pytest.mark.parametrize("s2", [1e-3, 0.1, 0.7])
def test_gaussian_cosine_closed_form(s2):
    ev = gaussian_cosine(s2)
    for th in (0.0, 0.4, 2.0):
        val, _ = ev.value([th])
        assert abs(val - math.exp(-s2 / 2) * math.cos(th)) < 1e-12


def test_trajectory_agrees_with_exact_on_toy_model():
    m = ToyModel(ToyModelSpec())
    noise = NoiseSpec(q1=1e-3, q2=1e-2, q_readout=1e-2)
    th = np.random.default_rng(3).uniform(0, 2 * np.pi, 8)
    exact, _ = m.evaluator(noise).value(th)
    est, se = m.evaluator(noise, mode="trajectory", samples=100_000, seed=11).value(th)
    assert se > 0
    assert abs(est - exact) < 4 * se


def test_trajectory_reproducible_and_thread_independent():
    m = ToyModel(ToyModelSpec())
    noise = NoiseSpec(q1=1e-3, q2=1e-2, q_readout=1e-2)
    a = m.evaluator(noise, mode="trajectory", samples=5000, seed=4).value(m.theta_opt)
    b = m.evaluator(noise, mode="trajectory", samples=5000, seed=4).value(m.theta_opt)
    c = m.evaluator(noise, mode="trajectory", samples=5000, seed=4, threads=3).value(m.theta_opt)
    d = m.evaluator(noise, mode="trajectory", samples=5000, seed=5).value(m.theta_opt)
    assert a == b
    assert a[0] == pytest.approx(c[0], abs=1e-12)
    assert a != d


def test_evaluator_validation():
    cf = rx_cost()
    with pytest.raises(ValueError):
        NoisyEvaluator(cf, mode="shots")
    with pytest.raises(ValueError):
        NoisyEvaluator(cf, mode="trajectory", samples=1).value([0.0])
    big = CostFunction(Circuit(3, [Rotation(PauliString("XII"), 0)]),
                       [(random_dense_observable(np.random.default_rng(0), 3), basis_state(3))])
    with pytest.raises(ValueError):
        NoisyEvaluator(big, max_qubits=2)
    with pytest.raises(QubitLimitError):
        big.value_rho([0.0], max_qubits=2)


def test_evaluation_counter():
    ev = gaussian_cosine(0.1)
    ev.value([0.1])
    second_derivative(ev, [0.1], 0)
    assert ev.n_evaluations == 3


# --- derivatives ----------------------------------------------------------------


def test_second_derivative_cosine():
    assert second_derivative(rx_cost(), [0.0], 0) == pytest.approx(-1.0, abs=1e-15)


def fd_second(cf, th, i, h=1e-3):
    e = np.zeros_like(th)
    e[i] = h
    return (cf.value(th + e) - 2 * cf.value(th) + cf.value(th - e)) / h**2


def fd_virtual_second(cf, th, j, h=1e-3):
    v = np.zeros(cf.n_virtual)
    out = []
    for s in (h, 0.0, -h):
        v[j] = s
        out.append(cf.value(th, v))
    return (out[0] - 2 * out[1] + out[2]) / h**2


def test_second_derivative_vs_finite_difference():
    rng = np.random.default_rng(5)
    for _ in range(50):
        cf = random_cost(rng, n=int(rng.integers(1, 4)), m=4, n_noise=2)
        th = rng.uniform(0, 2 * np.pi, cf.n_params)
        for i in range(cf.n_params):
            exact = second_derivative(cf, th, i)
            assert abs(exact - fd_second(cf, th, i)) <= 1e-5 * max(abs(exact), 1.0)
        for j in range(cf.n_virtual):
            exact = second_derivative(cf, th, j, "virtual")
            assert abs(exact - fd_virtual_second(cf, th, j)) <= 1e-5 * max(abs(exact), 1.0)


def test_second_derivative_bounded_by_half_width():
    rng = np.random.default_rng(6)
    for _ in range(30):
        cf = random_cost(rng)
        th = rng.uniform(0, 6, cf.n_params)
        d2 = second_derivatives(cf, th)
        assert np.all(np.abs(d2) <= cf.spectral_width() / 2 + 1e-12)


def test_second_derivative_index_errors():
    with pytest.raises(IndexError):
        second_derivative(rx_cost(), [0.0], 1)
    with pytest.raises(IndexError):
        second_derivative(rx_cost(), [0.0], 0, "virtual")
    with pytest.raises(ValueError):
        second_derivative(rx_cost(), [0.0], 0, "both")


def test_hessian_diagonal_nonnegative_at_toy_minimum():
    m = ToyModel(ToyModelSpec())
    cf, _ = m.cost()
    res = optimize(cf)
    assert np.all(second_derivatives(cf, res.theta) >= -1e-8)


def test_gradient_cosine():
    cf = rx_cost()
    assert gradient(cf, [0.0])[0] == pytest.approx(0.0, abs=1e-15)
    assert gradient(cf, [math.pi / 2])[0] == pytest.approx(-1.0, abs=1e-15)


def test_gradient_vs_finite_difference():
    rng = np.random.default_rng(7)
    for _ in range(30):
        cf = random_cost(rng)
        th = rng.uniform(0, 6, cf.n_params)
        h = 1e-5
        fd = [(cf.value(th + h * e) - cf.value(th - h * e)) / (2 * h) for e in np.eye(cf.n_params)]
        assert np.max(np.abs(gradient(cf, th) - fd)) <= 1e-6


def test_cross_section_is_sinusoidal():
    rng = np.random.default_rng(8)
    cf = random_cost(rng, n_noise=3)
    th = rng.uniform(0, 6, cf.n_params)
    t = np.linspace(0, 2 * np.pi, 25)
    for which, j in (("real", 1), ("virtual", 2)):
        vals = []
        for s in t:
            if which == "real":
                x = th.copy()
                x[j] = s
                vals.append(cf.value(x))
            else:
                v = np.zeros(cf.n_virtual)
                v[j] = s
                vals.append(cf.value(th, v))
        basis = np.column_stack([np.cos(t), np.sin(t), np.ones_like(t)])
        coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
        assert np.max(np.abs(basis @ coef - vals)) < 1e-10


# --- Fubini-Study diagonal -----------------------------------------------------


def test_fubini_rx_on_zero():
    assert fubini_diag(rx_cost(), [0.3], 0) == pytest.approx(0.25, abs=1e-15)


def test_fubini_bounded():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        cf = random_cost(rng, n=int(rng.integers(1, 4)), m=3)
        th = rng.uniform(0, 2 * np.pi, 3)
        g = fubini_diag(cf, th, int(rng.integers(0, 3)))
        assert -1e-15 <= g <= 0.25 + 1e-12


def test_fubini_vs_overlap_curvature():
    rng = np.random.default_rng(10)
    eps = 1e-3
    for _ in range(50):
        cf = random_cost(rng, m=4)
        th = rng.uniform(0, 2 * np.pi, 4)
        psi = cf.state(th)
        for i in range(4):
            shifted = th.copy()
            shifted[i] += eps
            fid = abs(np.vdot(cf.state(shifted), psi)) ** 2
            assert abs(fubini_diag(cf, th, i) - (1 - fid) / eps**2) < 1e-5


def test_fubini_needs_common_input():
    rng = np.random.default_rng(11)
    c = random_circuit(rng, 2, 2)
    cf = CostFunction(c, [(random_dense_observable(rng, 2), random_state(rng, 4)),
                          (random_dense_observable(rng, 2), random_state(rng, 4))])
    with pytest.raises(ValueError):
        fubini_diag(cf, [0.0, 0.0], 0)
    assert len(fubini_diags(random_cost(rng), np.zeros(5))) == 5
