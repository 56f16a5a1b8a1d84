"""Both kernel backends against dense matrix algebra, and against each other."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqa_noise import kernels
from vqa_noise.pauli import PauliString

from conftest import random_density, random_state

pauli_strings = st.integers(1, 4).flatmap(
    lambda n: st.text(alphabet="IXYZ", min_size=n, max_size=n).filter(lambda s: set(s) != {"I"}))


def _rot(p, theta):
    m = p.matrix()
    return np.cos(theta / 2) * np.eye(m.shape[0]) - 1j * np.sin(theta / 2) * m


@given(pauli_strings, st.floats(-10, 10), st.integers(0, 2**32 - 1))
def test_rotate_vec_matches_dense(s, theta, seed):
    from conftest import BACKENDS

    p = PauliString(s)
    psi = random_state(np.random.default_rng(seed), 2**p.n_qubits)
    ref = _rot(p, theta) @ psi
    for b in BACKENDS:
        out = psi.copy()
        b.values[0].rotate_vec(out, *p.masks, theta)
        assert np.allclose(out, ref, atol=1e-12)


def test_pauli_vec(backend):
    rng = np.random.default_rng(1)
    for s in ["X", "Y", "Z", "XY", "YZX", "IYIZ"]:
        p = PauliString(s)
        psi = random_state(rng, 2**p.n_qubits)
        out = psi.copy()
        backend.pauli_vec(out, *p.masks)
        assert np.allclose(out, p.matrix() @ psi, atol=1e-12)


def test_rotate_rho(backend):
    rng = np.random.default_rng(2)
    for s in ["X", "Z", "YX", "ZZ", "XIY", "IZIZ", "YYYY"]:
        p = PauliString(s)
        rho = random_density(rng, 2**p.n_qubits)
        u = _rot(p, 0.77)
        out = rho.copy()
        backend.rotate_rho(out, *p.masks, 0.77)
        assert np.allclose(out, u @ rho @ u.conj().T, atol=1e-12)


def test_pauli_channel_rho(backend):
    rng = np.random.default_rng(3)
    for s in ["X", "Y", "Z", "XY", "ZIZ", "IYXZ"]:
        p = PauliString(s)
        m = p.matrix()
        rho = random_density(rng, 2**p.n_qubits)
        out = rho.copy()
        x, z, _ = p.masks
        backend.pauli_channel_rho(out, x, z, 0.13)
        assert np.allclose(out, 0.87 * rho + 0.13 * m @ rho @ m, atol=1e-12)


def test_phase_flips(backend):
    rng = np.random.default_rng(4)
    cz = np.diag([1, 1, 1, -1]).astype(complex)
    u = np.kron(np.kron(np.eye(2), cz), np.eye(2))  # CZ on qubits 1, 2 of 4
    mask = (1 << 2) | (1 << 1)
    psi = random_state(rng, 16)
    out = psi.copy()
    backend.phase_flip_vec(out, mask)
    assert np.allclose(out, u @ psi)
    rho = random_density(rng, 16)
    out = rho.copy()
    backend.phase_flip_rho(out, mask)
    assert np.allclose(out, u @ rho @ u.conj().T)


def test_backends_agree_bitwise_close():
    from conftest import BACKENDS

    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    py, cy = (b.values[0] for b in BACKENDS)
    rng = np.random.default_rng(5)
    for s in ["XYZZ", "IIXY", "ZIIZ", "YIYI"]:
        p = PauliString(s)
        rho = random_density(rng, 16)
        a, b = rho.copy(), rho.copy()
        py.rotate_rho(a, *p.masks, 1.3)
        cy.rotate_rho(b, *p.masks, 1.3)
        py.pauli_channel_rho(a, p.masks[0], p.masks[1], 0.02)
        cy.pauli_channel_rho(b, p.masks[0], p.masks[1], 0.02)
        assert np.max(np.abs(a - b)) < 1e-14


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


def test_env_var_forces_fallback():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from vqa_noise import kernels; print(kernels.BACKEND)"],
        env={"VQA_NOISE_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
