"""Dense statevector / density-matrix simulation of Pauli-rotation circuits.

Conventions:

* ``Rotation(A, slot)`` applies ``exp(-i theta[slot] A / 2)``.
* Gates act in list order; the first gate touches the input state first.
* Basis index bits are big-endian: qubit 0 is the leftmost tensor factor.
* ``NoiseSite`` marks a stochastic Pauli channel together with the virtual
  rotation of the same generator. Its virtual angle is zero unless a caller
  shifts it; the channel itself only acts in density-matrix evolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from vqa_noise import kernels
from vqa_noise.pauli import PauliString

DEFAULT_MAX_QUBITS = 8


class QubitLimitError(ValueError):
    """Raised when exact density-matrix evolution is requested above the qubit cap."""


@dataclass(frozen=True)
class Rotation:
    generator: PauliString
    slot: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.generator.qubits


@dataclass(frozen=True, eq=False)
class FixedGate:
    """Non-parametric gate: ``"CZ"`` on two qubits, or a custom unitary."""

    name: str
    qubits: tuple[int, ...]
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.name == "CZ":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError("CZ needs two distinct qubits")
            return
        if self.matrix is None:
            raise ValueError(f"fixed gate {self.name!r} needs a matrix")
        m = np.asarray(self.matrix, dtype=complex)
        d = 2 ** len(self.qubits)
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match {len(self.qubits)} qubits")
        if np.max(np.abs(m.conj().T @ m - np.eye(d))) > 1e-12:
            raise ValueError(f"fixed gate {self.name!r} is not unitary")
        object.__setattr__(self, "matrix", m)

    def unitary(self) -> np.ndarray:
        if self.name == "CZ":
            return np.diag([1, 1, 1, -1]).astype(complex)
        return self.matrix


@dataclass(frozen=True)
class NoiseSite:
    generator: PauliString
    p: float
    slot: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.generator.qubits


Gate = Union[Rotation, FixedGate, NoiseSite]


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate list with real parameter slots and virtual (noise) slots."""

    n_qubits: int
    gates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        real, virtual = [], []
        for g in self.gates:
            if isinstance(g, (Rotation, NoiseSite)):
                if g.generator.n_qubits != self.n_qubits:
                    raise ValueError(f"generator {g.generator} is not on {self.n_qubits} qubits")
                if g.generator.weight < 1:
                    raise ValueError("rotation/noise generator must not be the identity")
                (real if isinstance(g, Rotation) else virtual).append(g.slot)
            elif isinstance(g, FixedGate):
                if any(not 0 <= q < self.n_qubits for q in g.qubits):
                    raise IndexError(f"gate {g.name} acts outside {self.n_qubits} qubits")
            else:
                raise TypeError(f"unknown gate {g!r}")
        for kind, slots in (("parameter", real), ("virtual", virtual)):
            if sorted(slots) != list(range(len(slots))):
                raise ValueError(f"{kind} slots must be 0..{len(slots) - 1}, each used once")

    @cached_property
    def n_params(self) -> int:
        return sum(isinstance(g, Rotation) for g in self.gates)

    @cached_property
    def n_virtual(self) -> int:
        return sum(isinstance(g, NoiseSite) for g in self.gates)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @cached_property
    def program(self) -> tuple:
        """Flat op tuples consumed by the evolution loops."""
        n = self.n_qubits
        ops = []
        for g in self.gates:
            if isinstance(g, Rotation):
                ops.append(("rot", *g.generator.masks, g.slot))
            elif isinstance(g, NoiseSite):
                ops.append(("site", *g.generator.masks, g.slot, float(g.p)))
            elif g.name == "CZ":
                a, b = g.qubits
                ops.append(("cz", (1 << (n - 1 - a)) | (1 << (n - 1 - b))))
            else:
                ops.append(("dense", g.qubits, g.matrix))
        return tuple(ops)

    def without_noise(self) -> "Circuit":
        return Circuit(self.n_qubits, [g for g in self.gates if not isinstance(g, NoiseSite)])

    def inverse(self) -> "Circuit":
        """Noiseless inverse; run it with negated parameters."""
        inv = []
        for g in reversed(self.gates):
            if isinstance(g, NoiseSite):
                continue
            if isinstance(g, FixedGate) and g.name != "CZ":
                g = FixedGate(g.name + "_dg", g.qubits, g.matrix.conj().T)
            inv.append(g)
        return Circuit(self.n_qubits, inv)


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def _check_qubits(generator: PauliString, n_qubits: int):
    if generator.n_qubits > n_qubits:
        raise IndexError(f"generator {generator} acts on qubits beyond {n_qubits}")


def _as_state(state, dim: int) -> np.ndarray:
    psi = np.array(state, dtype=complex, copy=True).reshape(-1)
    if psi.shape[0] != dim:
        raise ValueError(f"state has dimension {psi.shape[0]}, expected {dim}")
    return psi


def apply_rotation(state, generator: PauliString, angle: float) -> np.ndarray:
    """Return ``exp(-i angle A / 2) |state>`` as a new array."""
    psi = np.array(state, dtype=complex, copy=True)
    n = int(np.log2(psi.shape[0]))
    _check_qubits(generator, n)
    if generator.n_qubits != n:
        raise ValueError(f"generator on {generator.n_qubits} qubits, state on {n}")
    kernels.rotate_vec(psi, *generator.masks, float(angle))
    return psi


def _dense_left(mat: np.ndarray, qubits, u: np.ndarray, n: int) -> np.ndarray:
    """Apply ``u`` to ``qubits`` of the row index of ``mat`` (shape (2**n, m))."""
    k = len(qubits)
    m = mat.shape[1]
    t = mat.reshape([2] * n + [m])
    t = np.tensordot(u.reshape([2] * (2 * k)), t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(2**n, m)


def _params(values, expected: int, what: str) -> np.ndarray:
    if values is None:
        return np.zeros(expected)
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape[0] != expected:
        raise ValueError(f"{what} has length {arr.shape[0]}, circuit expects {expected}")
    return arr


def run_circuit(
    circuit: Circuit,
    params=None,
    virtual=None,
    state=None,
    fired: frozenset | set | None = None,
    extra_fired: dict | None = None,
) -> np.ndarray:
    """Evolve a pure state through ``circuit``.

    Noise sites contribute only their virtual rotation, plus the bare Pauli
    when their slot is in ``fired`` (used by trajectory sampling).
    ``extra_fired`` maps a slot to further Pauli strings applied after it.
    """
    theta = _params(params, circuit.n_params, "params")
    vtheta = _params(virtual, circuit.n_virtual, "virtual params")
    n = circuit.n_qubits
    psi = basis_state(n) if state is None else _as_state(state, circuit.dim)
    for op in circuit.program:
        kind = op[0]
        if kind == "rot":
            kernels.rotate_vec(psi, op[1], op[2], op[3], theta[op[4]])
        elif kind == "cz":
            kernels.phase_flip_vec(psi, op[1])
        elif kind == "site":
            a = vtheta[op[4]]
            if a != 0.0:
                kernels.rotate_vec(psi, op[1], op[2], op[3], a)
            if fired and op[4] in fired:
                kernels.pauli_vec(psi, op[1], op[2], op[3])
            if extra_fired and op[4] in extra_fired:
                for gen in extra_fired[op[4]]:
                    kernels.pauli_vec(psi, *gen.masks)
        else:
            psi = _dense_left(psi[:, None], op[1], op[2], n)[:, 0].copy()
    return psi


def evolve_density(
    rho,
    circuit: Circuit,
    params=None,
    virtual=None,
    noisy: bool = True,
    extra_channels: dict | None = None,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> np.ndarray:
    """Evolve a density matrix, applying each noise site's channel when ``noisy``.

    ``extra_channels`` maps a virtual slot to ``[(PauliString, p), ...]``
    applied right after that site, regardless of ``noisy``.
    """
    n = circuit.n_qubits
    if n > max_qubits:
        raise QubitLimitError(f"{n} qubits exceeds the exact-mode limit of {max_qubits}")
    theta = _params(params, circuit.n_params, "params")
    vtheta = _params(virtual, circuit.n_virtual, "virtual params")
    r = np.array(rho, dtype=complex, copy=True)
    if r.shape != (circuit.dim, circuit.dim):
        raise ValueError(f"density matrix shape {r.shape} does not match {n} qubits")
    r = np.ascontiguousarray(r)
    for op in circuit.program:
        kind = op[0]
        if kind == "rot":
            kernels.rotate_rho(r, op[1], op[2], op[3], theta[op[4]])
        elif kind == "cz":
            kernels.phase_flip_rho(r, op[1])
        elif kind == "site":
            a = vtheta[op[4]]
            if a != 0.0:
                kernels.rotate_rho(r, op[1], op[2], op[3], a)
            if noisy and op[5] > 0.0:
                kernels.pauli_channel_rho(r, op[1], op[2], op[5])
            if extra_channels and op[4] in extra_channels:
                for gen, p in extra_channels[op[4]]:
                    x, z, _ = gen.masks
                    kernels.pauli_channel_rho(r, x, z, p)
        else:
            left = _dense_left(r, op[1], op[2], n)
            r = np.ascontiguousarray(_dense_left(left.conj().T, op[1], op[2], n).conj().T)
    return r


def pure_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


# --- observables -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseObservable:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("observable must be a square matrix")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("observable is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def expectation(self, psi) -> float:
        return float(np.real(np.vdot(psi, self.matrix @ psi)))

    def expectation_rho(self, rho) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, rho)))

    def to_dense(self) -> np.ndarray:
        return self.matrix


@dataclass(frozen=True, eq=False)
class SpectralObservable:
    """``H = sum_i E_i V|i><i|V^dagger`` with ``V`` a noiseless circuit at fixed params."""

    energies: np.ndarray
    circuit: Circuit
    params: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.shape != (self.circuit.dim,):
            raise ValueError("need one energy per basis state")
        if np.any(np.diff(e) < 0):
            raise ValueError("energies must be sorted ascending")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))
        object.__setattr__(self, "circuit", self.circuit.without_noise())

    @property
    def dim(self) -> int:
        return self.circuit.dim

    @property
    def spectrum(self) -> np.ndarray:
        return self.energies

    @cached_property
    def _inverse(self) -> Circuit:
        return self.circuit.inverse()

    def populations(self, psi) -> np.ndarray:
        """``|<i|V^dagger|psi>|^2`` for every eigen-index i."""
        back = run_circuit(self._inverse, -self.params, state=psi)
        return np.abs(back) ** 2

    def expectation(self, psi) -> float:
        return float(self.energies @ self.populations(psi))

    def expectation_rho(self, rho) -> float:
        back = evolve_density(rho, self._inverse, -self.params, noisy=False, max_qubits=64)
        return float(self.energies @ np.real(np.diag(back)))

    def eigenstate(self, i: int) -> np.ndarray:
        return run_circuit(self.circuit, self.params, state=basis_state(self.circuit.n_qubits, i))

    def to_dense(self) -> np.ndarray:
        v = np.column_stack([self.eigenstate(i) for i in range(self.dim)])
        h = (v * self.energies) @ v.conj().T
        return (h + h.conj().T) / 2


Observable = Union[DenseObservable, SpectralObservable]


def expectation(state, obs: Observable) -> float:
    """Expectation of ``obs`` in a state vector (1-D) or density matrix (2-D)."""
    s = np.asarray(state)
    if s.shape[0] != obs.dim:
        raise ValueError(f"state dimension {s.shape[0]} does not match observable {obs.dim}")
    if s.ndim == 1:
        return obs.expectation(s)
    return obs.expectation_rho(s)


# --- JSON ------------------------------------------------------------------


def circuit_to_dict(circuit: Circuit) -> dict:
    gates = []
    for g in circuit.gates:
        if isinstance(g, Rotation):
            gates.append({
                "kind": "rotation",
                "generator": g.generator.restrict(g.qubits).letters,
                "qubits": list(g.qubits),
                "param_slot": g.slot,
            })
        elif isinstance(g, NoiseSite):
            gates.append({
                "kind": "noise",
                "generator": g.generator.restrict(g.qubits).letters,
                "qubits": list(g.qubits),
                "virtual_slot": g.slot,
                "p": g.p,
            })
        elif g.name == "CZ":
            gates.append({"kind": "fixed", "name": "CZ", "qubits": list(g.qubits)})
        else:
            m = g.matrix
            gates.append({
                "kind": "fixed",
                "name": g.name,
                "qubits": list(g.qubits),
                "matrix": [[[float(v.real), float(v.imag)] for v in row] for row in m],
            })
    return {"n_qubits": circuit.n_qubits, "gates": gates}


def circuit_from_dict(doc: dict) -> Circuit:
    n = int(doc["n_qubits"])
    gates: list[Gate] = []
    for g in doc["gates"]:
        kind = g["kind"]
        if kind in ("rotation", "noise"):
            gen = PauliString(g["generator"]).embed(n, g["qubits"])
            if kind == "rotation":
                gates.append(Rotation(gen, int(g["param_slot"])))
            else:
                gates.append(NoiseSite(gen, float(g["p"]), int(g["virtual_slot"])))
        elif kind == "fixed":
            m = None
            if "matrix" in g:
                m = np.array([[complex(re, im) for re, im in row] for row in g["matrix"]])
            gates.append(FixedGate(g["name"], tuple(g["qubits"]), m))
        else:
            raise ValueError(f"unknown gate kind {kind!r}")
    return Circuit(n, gates)


def dumps(circuit: Circuit) -> str:
    return json.dumps(circuit_to_dict(circuit), indent=2)


def loads(text: str) -> Circuit:
    return circuit_from_dict(json.loads(text))


def rotation_layer(n_qubits: int, letters: Sequence[str], first_slot: int = 0) -> list[Rotation]:
    """One single-qubit rotation per qubit, slots numbered from ``first_slot``."""
    return [
        Rotation(PauliString.single(n_qubits, q, c), first_slot + q)
        for q, c in enumerate(letters)
    ]
