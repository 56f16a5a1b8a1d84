"""Pure numpy implementation of the kernels in ``_kernels.pyx``.

Same signatures and in-place semantics; used when the extension is missing
or ``VQA_NOISE_PURE_PYTHON`` is set.
"""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=4096)
def _tables(dim: int, x: int, z: int, ny: int):
    idx = np.arange(dim)
    sign = 1.0 - 2.0 * (np.bitwise_count(idx & z) & 1)
    omega = (1j**ny) * sign
    flip = idx ^ x
    # (P psi)[c] = omega[c ^ x] * psi[c ^ x]
    return flip, omega[flip], sign[flip]


def pauli_vec(psi, x, z, ny):
    flip, w, _ = _tables(psi.shape[0], x, z, ny)
    psi[:] = w * psi[flip]


def rotate_vec(psi, x, z, ny, theta):
    flip, w, _ = _tables(psi.shape[0], x, z, ny)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    psi[:] = c * psi - 1j * s * (w * psi[flip])


def rotate_rho(rho, x, z, ny, theta):
    flip, w, _ = _tables(rho.shape[0], x, z, ny)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    left = c * rho - 1j * s * (w[:, None] * rho[flip, :])
    rho[:] = c * left + 1j * s * (np.conj(w)[None, :] * left[:, flip])


def pauli_channel_rho(rho, x, z, p):
    flip, _, sg = _tables(rho.shape[0], x, z, 0)
    conj = (sg[:, None] * sg[None, :]) * rho[np.ix_(flip, flip)]
    rho[:] = (1.0 - p) * rho + p * conj


@lru_cache(maxsize=1024)
def _flip_mask(dim: int, mask: int):
    idx = np.arange(dim)
    return np.where((idx & mask) == mask, -1.0, 1.0)


def phase_flip_vec(psi, mask):
    psi *= _flip_mask(psi.shape[0], mask)


def phase_flip_rho(rho, mask):
    f = _flip_mask(rho.shape[0], mask)
    rho *= f[:, None] * f[None, :]
