"""Noiseless and noisy cost functions, shift-rule derivatives, Fubini-Study diagonal."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from vqa_noise.channels import VirtualParameterRegistry, shift_gate_channels
from vqa_noise.circuit import (
    DEFAULT_MAX_QUBITS,
    Circuit,
    evolve_density,
    pure_density,
    run_circuit,
)

TRAJECTORY_CHUNK = 1024


@dataclass(frozen=True, eq=False)
class CostFunction:
    """``C(theta) = sum_l <phi_l| U^dagger H_l U |phi_l>``.

    The circuit may carry noise sites; they only matter to a
    :class:`NoisyEvaluator` or when a virtual angle is shifted.
    """

    circuit: Circuit
    terms: tuple

    def __post_init__(self):
        terms = []
        for obs, phi in self.terms:
            phi = np.asarray(phi, dtype=complex)
            if phi.shape != (self.circuit.dim,) or obs.dim != self.circuit.dim:
                raise ValueError("term dimensions do not match the circuit")
            if abs(np.linalg.norm(phi) - 1.0) > 1e-12:
                raise ValueError("input states must be normalized")
            terms.append((obs, phi))
        if not terms:
            raise ValueError("cost function needs at least one term")
        object.__setattr__(self, "terms", tuple(terms))
        groups: list[list[int]] = []
        for i, (_, phi) in enumerate(terms):
            for g in groups:
                if np.array_equal(terms[g[0]][1], phi):
                    g.append(i)
                    break
            else:
                groups.append([i])
        object.__setattr__(self, "_groups", tuple(tuple(g) for g in groups))

    @property
    def n_params(self) -> int:
        return self.circuit.n_params

    @property
    def n_virtual(self) -> int:
        return self.circuit.n_virtual

    @property
    def common_input(self) -> bool:
        return len(self._groups) == 1

    def term_ranges(self) -> list[tuple[float, float]]:
        return [(float(obs.spectrum[0]), float(obs.spectrum[-1])) for obs, _ in self.terms]

    def spectral_width(self) -> float:
        """``sum_l (E_max,l - E_0,l)``."""
        return sum(hi - lo for lo, hi in self.term_ranges())

    def state(self, theta, virtual=None, group: int = 0) -> np.ndarray:
        phi = self.terms[self._groups[group][0]][1]
        return run_circuit(self.circuit, theta, virtual, phi)

    def value(self, theta, virtual=None) -> float:
        total = 0.0
        for g in range(len(self._groups)):
            psi = self.state(theta, virtual, g)
            total += sum(self.terms[i][0].expectation(psi) for i in self._groups[g])
        return float(total)

    def value_rho(self, theta, virtual=None, noisy=True, extra_channels=None,
                  max_qubits=DEFAULT_MAX_QUBITS) -> float:
        total = 0.0
        for g in self._groups:
            rho = evolve_density(pure_density(self.terms[g[0]][1]), self.circuit, theta, virtual,
                                 noisy=noisy, extra_channels=extra_channels, max_qubits=max_qubits)
            total += sum(self.terms[i][0].expectation_rho(rho) for i in g)
        return float(total)

    def trajectory_value(self, theta, virtual, fired, extra_fired=None) -> float:
        total = 0.0
        for g in self._groups:
            psi = run_circuit(self.circuit, theta, virtual, self.terms[g[0]][1], fired=fired,
                              extra_fired=extra_fired)
            total += sum(self.terms[i][0].expectation(psi) for i in g)
        return float(total)


def eval_cost(cf: CostFunction, theta) -> float:
    return cf.value(theta)


@dataclass(eq=False)
class NoisyEvaluator:
    """Noisy cost ``C_noisy(theta)`` for a circuit carrying noise sites.

    ``mode="exact"`` propagates density matrices through every channel.
    ``mode="trajectory"`` averages pure-state runs in which each site fires
    its Pauli independently with probability p. Trajectory ``j`` draws from
    the stream of chunk ``j // TRAJECTORY_CHUNK`` seeded by ``(seed, chunk)``,
    so results do not depend on ``threads``.
    """

    cost: CostFunction
    registry: VirtualParameterRegistry = field(default_factory=VirtualParameterRegistry)
    mode: str = "exact"
    samples: int = 100_000
    seed: int = 0
    shift_gate_noise: bool = False
    threads: int = 1
    max_qubits: int = DEFAULT_MAX_QUBITS
    n_evaluations: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "trajectory"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.registry) != self.cost.n_virtual:
            raise ValueError("registry size does not match the circuit's noise sites")
        if self.mode == "exact" and self.cost.circuit.n_qubits > self.max_qubits:
            raise ValueError(
                f"{self.cost.circuit.n_qubits} qubits exceeds the exact-mode limit {self.max_qubits}")
        self._probs = np.array([g.p for g in self.cost.circuit.gates if hasattr(g, "p")])

    @property
    def n_params(self) -> int:
        return self.cost.n_params

    @property
    def n_virtual(self) -> int:
        return self.cost.n_virtual

    def shift_channels(self, slot: int) -> dict | None:
        if not self.shift_gate_noise:
            return None
        return {slot: shift_gate_channels(self.registry.entries[slot], self.cost.circuit.n_qubits)}

    def value(self, theta, virtual=None, extra_channels=None) -> tuple[float, float]:
        """Return ``(C_noisy, standard_error)``; the error is 0 in exact mode."""
        self.n_evaluations += 1
        if self.mode == "exact":
            v = self.cost.value_rho(theta, virtual, noisy=True, extra_channels=extra_channels,
                                    max_qubits=self.max_qubits)
            return v, 0.0
        return self._trajectories(theta, virtual, extra_channels)

    def _chunk(self, c: int, n: int, theta, virtual, extra_channels, memo) -> tuple[float, float]:
        rng = np.random.default_rng([self.seed, c])
        draws = rng.random((n, len(self._probs))) < self._probs
        extra_slots = sorted(extra_channels) if extra_channels else []
        extra_p = [p for s in extra_slots for _, p in extra_channels[s]]
        extra_draws = rng.random((n, len(extra_p))) < np.array(extra_p) if extra_p else None
        s = s2 = 0.0
        for j in range(n):
            fired = frozenset(np.flatnonzero(draws[j]).tolist())
            key: tuple = (fired,)
            extra_fired = None
            if extra_draws is not None:
                hits = tuple(np.flatnonzero(extra_draws[j]).tolist())
                key = (fired, hits)
                if hits:
                    flat = [(s_, gen) for s_ in extra_slots for gen, _ in extra_channels[s_]]
                    extra_fired = {}
                    for h in hits:
                        extra_fired.setdefault(flat[h][0], []).append(flat[h][1])
            v = memo.get(key)
            if v is None:
                v = self.cost.trajectory_value(theta, virtual, fired, extra_fired)
                memo[key] = v
            s += v
            s2 += v * v
        return s, s2

    def _trajectories(self, theta, virtual, extra_channels) -> tuple[float, float]:
        n = int(self.samples)
        if n < 2:
            raise ValueError("trajectory mode needs at least 2 samples")
        chunks = [(c, min(TRAJECTORY_CHUNK, n - c * TRAJECTORY_CHUNK))
                  for c in range(math.ceil(n / TRAJECTORY_CHUNK))]
        memo: dict = {}
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(
                    lambda cn: self._chunk(cn[0], cn[1], theta, virtual, extra_channels, {}), chunks))
        else:
            parts = [self._chunk(c, m, theta, virtual, extra_channels, memo) for c, m in chunks]
        total = sum(p[0] for p in parts)
        total_sq = sum(p[1] for p in parts)
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
        return mean, math.sqrt(var / n)


def eval_noisy_cost(ev: NoisyEvaluator, theta) -> tuple[float, float]:
    return ev.value(theta)


# --- derivatives --------------------------------------------------------------


def _value(target, theta, virtual=None, shifted_slot=None) -> float:
    if isinstance(target, NoisyEvaluator):
        extra = target.shift_channels(shifted_slot) if shifted_slot is not None else None
        return target.value(theta, virtual, extra)[0]
    return target.value(theta, virtual)


def _shift(target, theta, i: int, which: str, amount: float):
    theta = np.array(theta, dtype=float)
    nv = target.n_virtual
    if which == "real":
        if not 0 <= i < target.n_params:
            raise IndexError(f"real parameter index {i} out of range")
        theta[i] += amount
        return theta, None, None
    if which == "virtual":
        if not 0 <= i < nv:
            raise IndexError(f"virtual parameter index {i} out of range")
        virtual = np.zeros(nv)
        virtual[i] = amount
        return theta, virtual, i
    raise ValueError(f"which must be 'real' or 'virtual', got {which!r}")


def second_derivative(target, theta, i: int, which: str = "real", base: float | None = None) -> float:
    """``(C(theta + pi e_i) - C(theta)) / 2``; noisy if ``target`` is a :class:`NoisyEvaluator`.

    ``base`` may pass a precomputed ``C(theta)``.
    """
    th, virt, slot = _shift(target, theta, i, which, math.pi)
    shifted = _value(target, th, virt, slot)
    if base is None:
        base = _value(target, np.asarray(theta, float))
    return 0.5 * (shifted - base)


def second_derivatives(target, theta, which: str = "real") -> np.ndarray:
    base = _value(target, np.asarray(theta, float))
    n = target.n_params if which == "real" else target.n_virtual
    return np.array([second_derivative(target, theta, i, which, base) for i in range(n)])


def gradient(target, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape[0])
    for i in range(theta.shape[0]):
        plus, minus = theta.copy(), theta.copy()
        plus[i] += math.pi / 2
        minus[i] -= math.pi / 2
        out[i] = 0.5 * (_value(target, plus) - _value(target, minus))
    return out


def fubini_diag(cf: CostFunction, theta, i: int, which: str = "real") -> float:
    """``G_ii = (1 - |<phi(theta + pi e_i)|phi(theta)>|^2) / 4``."""
    if not cf.common_input:
        raise ValueError("Fubini-Study diagonal needs a single common input state")
    th, virt, _ = _shift(cf, theta, i, which, math.pi)
    psi = cf.state(np.asarray(theta, float))
    psi_i = cf.state(th, virt)
    return 0.25 * (1.0 - abs(np.vdot(psi_i, psi)) ** 2)


def fubini_diags(cf: CostFunction, theta, which: str = "real", slots: Sequence[int] | None = None):
    n = cf.n_params if which == "real" else cf.n_virtual
    idx = range(n) if slots is None else slots
    return np.array([fubini_diag(cf, theta, i, which) for i in idx])
