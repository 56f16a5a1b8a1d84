"""Compare the compiled kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--qubits 4 6 8] [--repeat 200]

Also times one exact noisy evaluation of the 4-qubit toy model under each
backend (the backend is chosen at import, so that part runs in subprocesses).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vqa_noise import _pykernels

try:
    from vqa_noise import _kernels
except ImportError:
    _kernels = None

TOY_SNIPPET = """
import timeit
from vqa_noise.channels import NoiseSpec
from vqa_noise.harness import ToyModel, ToyModelSpec
m = ToyModel(ToyModelSpec())
ev = m.evaluator(NoiseSpec(q1=1e-4, q2=1e-3, q_readout=1e-3))
ev.value(m.theta_opt)
print(min(timeit.repeat(lambda: ev.value(m.theta_opt), number=5, repeat=3)) / 5)
"""


def kernel_cases(n):
    rng = np.random.default_rng(0)
    dim = 2**n
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    rho = np.outer(psi, psi.conj())
    x, z = 0b101 % dim, 0b011 % dim
    ny = bin(x & z).count("1")
    return {
        "rotate_vec": (lambda k: k.rotate_vec(psi, x, z, ny, 0.3)),
        "rotate_rho": (lambda k: k.rotate_rho(rho, x, z, ny, 0.3)),
        "pauli_channel_rho": (lambda k: k.pauli_channel_rho(rho, x, z, 0.01)),
        "phase_flip_rho": (lambda k: k.phase_flip_rho(rho, 0b11)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, nargs="+", default=[4, 6, 8])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<20}{'n':>3}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n in args.qubits:
        for name, call in kernel_cases(n).items():
            t_py = min(timeit.repeat(lambda: call(_pykernels), number=args.repeat, repeat=3))
            t_py *= 1e6 / args.repeat
            if _kernels is None:
                print(f"{name:<20}{n:>3}{t_py:>12.2f}{'-':>12}{'-':>9}")
                continue
            t_cy = min(timeit.repeat(lambda: call(_kernels), number=args.repeat, repeat=3))
            t_cy *= 1e6 / args.repeat
            print(f"{name:<20}{n:>3}{t_py:>12.2f}{t_cy:>12.2f}{t_py / t_cy:>9.1f}")
    print("\ntoy-model exact noisy evaluation (n=4, 126 noise sites):")
    for label, env in (("python", {"VQA_NOISE_PURE_PYTHON": "1"}), ("cython", {})):
        full_env = {k: v for k, v in os.environ.items() if k != "VQA_NOISE_PURE_PYTHON"}
        full_env.update(env)
        out = subprocess.run([sys.executable, "-c", TOY_SNIPPET], env=full_env,
                             capture_output=True, text=True, check=True)
        print(f"  {label:<8}{1e3 * float(out.stdout):8.2f} ms")


if __name__ == "__main__":
    main()
