import numpy as np
import pytest
from hypothesis import settings

from vqa_noise import _pykernels
from vqa_noise.circuit import Circuit, DenseObservable, FixedGate, NoiseSite, Rotation
from vqa_noise.pauli import PauliString

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

try:
    from vqa_noise import _kernels
except ImportError:  # extension not built
    _kernels = None

BACKENDS = [pytest.param(_pykernels, id="python")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def random_pauli(rng, n, max_weight=2):
    w = int(rng.integers(1, min(max_weight, n) + 1))
    qubits = rng.choice(n, size=w, replace=False)
    return PauliString.from_sparse(n, {int(q): str(rng.choice(list("XYZ"))) for q in qubits})


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_hermitian(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_circuit(rng, n, n_params, n_fixed=2, n_noise=0, p_max=0.05, dense=True):
    """Random rotations interleaved with CZ / dense fixed gates and optional noise sites."""
    gates = [Rotation(random_pauli(rng, n), i) for i in range(n_params)]
    for _ in range(n_fixed):
        if n >= 2:
            a, b = (int(q) for q in rng.choice(n, size=2, replace=False))
            if dense and rng.random() < 0.5:
                gates.append(FixedGate("U", (a, b), random_unitary(rng, 4)))
            else:
                gates.append(FixedGate("CZ", (a, b)))
        else:
            gates.append(FixedGate("U", (0,), random_unitary(rng, 2)))
    for j in range(n_noise):
        gates.append(NoiseSite(random_pauli(rng, n), float(rng.uniform(0, p_max)), j))
    order = rng.permutation(len(gates))
    return Circuit(n, [gates[i] for i in order])


def random_dense_observable(rng, n, scale=1.0):
    return DenseObservable(random_hermitian(rng, 2**n, scale))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
