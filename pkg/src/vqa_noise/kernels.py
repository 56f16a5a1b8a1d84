"""Kernel backend selection.

The compiled extension is used when importable; otherwise, or when the
``VQA_NOISE_PURE_PYTHON`` environment variable is set to a non-empty value,
the numpy fallback is used. ``BACKEND`` names the active choice.
"""

import os

if os.environ.get("VQA_NOISE_PURE_PYTHON"):
    from vqa_noise import _pykernels as impl

    BACKEND = "python"
else:
    try:
        from vqa_noise import _kernels as impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from vqa_noise import _pykernels as impl

        BACKEND = "python"

pauli_vec = impl.pauli_vec
rotate_vec = impl.rotate_vec
rotate_rho = impl.rotate_rho
pauli_channel_rho = impl.pauli_channel_rho
phase_flip_vec = impl.phase_flip_vec
phase_flip_rho = impl.phase_flip_rho

__all__ = [
    "BACKEND",
    "pauli_vec",
    "rotate_vec",
    "rotate_rho",
    "pauli_channel_rho",
    "phase_flip_vec",
    "phase_flip_rho",
]
