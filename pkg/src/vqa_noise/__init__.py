"""Noise-precision analysis for variational quantum circuits.

Exact and trajectory-sampled noisy cost evaluation, leading-order error
estimates, spectral/geometric error bounds, and error mitigation through
virtual-parameter second derivatives.
"""

from vqa_noise.kernels import BACKEND
from vqa_noise.pauli import PauliString

__version__ = "0.1.0"

__all__ = ["BACKEND", "PauliString", "__version__"]
