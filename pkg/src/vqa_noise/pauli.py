"""Pauli strings encoded as (x, z) bit masks.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
computational-basis index. A string acts on basis states as

    P |b> = i**n_y * (-1)**popcount(b & z) |b ^ x>
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

_LETTERS = "IXYZ"
_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, e.g. ``PauliString("XIZ")``."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ValueError("a Pauli string needs at least one qubit")
        bad = set(self.letters) - set(_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        return cls.from_sparse(n_qubits, {qubit: letter})

    @classmethod
    def from_sparse(cls, n_qubits: int, ops: dict[int, str]) -> "PauliString":
        chars = ["I"] * n_qubits
        for q, letter in ops.items():
            if not 0 <= q < n_qubits:
                raise IndexError(f"qubit {q} out of range for {n_qubits} qubits")
            chars[q] = letter
        return cls("".join(chars))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(c != "I" for c in self.letters)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    @cached_property
    def masks(self) -> tuple[int, int, int]:
        """``(x_mask, z_mask, n_y)`` in the big-endian bit convention."""
        n = self.n_qubits
        x = z = ny = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                x |= bit
            if c in "ZY":
                z |= bit
            ny += c == "Y"
        return x, z, ny

    def restrict(self, qubits) -> "PauliString":
        return PauliString("".join(self.letters[q] for q in qubits))

    def embed(self, n_qubits: int, qubits) -> "PauliString":
        """Place this k-qubit string on ``qubits`` of an n-qubit register."""
        if len(qubits) != self.n_qubits:
            raise ValueError("qubit list length must match the string length")
        return PauliString.from_sparse(n_qubits, dict(zip(qubits, self.letters)))

    def commutes_with(self, other: "PauliString") -> bool:
        if other.n_qubits != self.n_qubits:
            raise ValueError("Pauli strings act on different qubit counts")
        x1, z1, _ = self.masks
        x2, z2, _ = other.masks
        return (bin(x1 & z2).count("1") + bin(z1 & x2).count("1")) % 2 == 0

    def matrix(self) -> np.ndarray:
        return reduce(np.kron, (_SINGLE[c] for c in self.letters))

    def __str__(self) -> str:
        return self.letters


def all_paulis(k: int, include_identity: bool = True) -> list[PauliString]:
    """All 4**k Pauli strings on k qubits, identity first, in IXYZ lexicographic order."""
    out = [PauliString("".join(p)) for p in itertools.product(_LETTERS, repeat=k)]
    return out if include_identity else out[1:]
