"""Stochastic Pauli, Gaussian-rotation and depolarizing channels.

A Gaussian spread of a Pauli-rotation angle is exactly a stochastic Pauli
channel, so every noise source is ultimately represented as a ``NoiseSite``
(a virtual rotation slot plus a stochastic channel) in the circuit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

from vqa_noise.circuit import Circuit, NoiseSite, Rotation
from vqa_noise.pauli import PauliString, all_paulis

PTM_MAX_QUBITS = 3
_QUADRATURE_NODES = 80
_BELOW_HALF = math.nextafter(0.5, 0.0)


# --- variance <-> probability maps ------------------------------------------


def variance_of_stochastic(p: float) -> float:
    """Gaussian angle variance equivalent to a stochastic Pauli channel of probability p."""
    if not 0.0 <= p < 0.5:
        raise ValueError(f"probability {p} outside [0, 1/2)")
    return -2.0 * math.log1p(-2.0 * p)


def stochastic_of_variance(sigma2: float) -> float:
    if sigma2 < 0:
        raise ValueError(f"negative variance {sigma2}")
    # huge variances round to exactly 1/2; keep the result strictly below it
    return min(-0.5 * math.expm1(-0.5 * sigma2), _BELOW_HALF)


def depolarizing_limit(k: int) -> float:
    d2 = 4**k
    return (d2 - 1) / d2


def depolarizing_gaussian_variance(k: int, q: float) -> float:
    """Common variance of the 4**k - 1 Pauli rotations composing a depolarizing channel."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0.0 <= q < depolarizing_limit(k):
        raise ValueError(f"depolarizing probability {q} outside [0, {depolarizing_limit(k)})")
    d2 = 4**k
    return -math.log1p(-d2 * q / (d2 - 1)) / 4 ** (k - 1)


def depolarizing_site_probability(k: int, q: float) -> float:
    return stochastic_of_variance(depolarizing_gaussian_variance(k, q))


# --- channels on a local k-qubit register -----------------------------------


@dataclass(frozen=True)
class StochasticPauliChannel:
    generator: PauliString
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise ValueError(f"probability {self.p} outside [0, 1/2)")

    @property
    def n_qubits(self) -> int:
        return self.generator.n_qubits

    def apply(self, rho: np.ndarray) -> np.ndarray:
        a = self.generator.matrix()
        return (1 - self.p) * rho + self.p * a @ rho @ a


@lru_cache(maxsize=None)
def _hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for E[f(Z)], Z ~ N(0, 1/2) scaled so that delta = sqrt(2 sigma2) * x."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return x, w / math.sqrt(math.pi)


@dataclass(frozen=True)
class GaussianRotationChannel:
    """Average of ``exp(-i D A/2) rho exp(i D A/2)`` over ``D ~ N(0, sigma2)``.

    ``apply`` integrates the angle numerically (Gauss-Hermite), independent
    of the closed-form probability map; ``as_stochastic`` gives the closed form.
    """

    generator: PauliString
    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError(f"negative variance {self.sigma2}")

    @property
    def n_qubits(self) -> int:
        return self.generator.n_qubits

    def _moments(self) -> tuple[float, float, float]:
        x, w = _hermite_rule(_QUADRATURE_NODES)
        delta = math.sqrt(2.0 * self.sigma2) * x
        c, s = np.cos(delta / 2), np.sin(delta / 2)
        return float(w @ (c * c)), float(w @ (s * s)), float(w @ (c * s))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        a = self.generator.matrix()
        cc, ss, cs = self._moments()
        return cc * rho + ss * a @ rho @ a + 1j * cs * (rho @ a - a @ rho)

    def as_stochastic(self) -> StochasticPauliChannel:
        return StochasticPauliChannel(self.generator, stochastic_of_variance(self.sigma2))


@dataclass(frozen=True)
class DepolarizingChannel:
    k: int
    q: float
    qubits: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 <= self.q < depolarizing_limit(self.k):
            raise ValueError(f"depolarizing probability {self.q} out of range for k={self.k}")
        if self.qubits is not None and len(self.qubits) != self.k:
            raise ValueError("target qubit count must equal k")

    @property
    def n_qubits(self) -> int:
        return self.k

    def apply(self, rho: np.ndarray) -> np.ndarray:
        paulis = all_paulis(self.k, include_identity=False)
        acc = sum(p.matrix() @ rho @ p.matrix() for p in paulis)
        return (1 - self.q) * rho + self.q / len(paulis) * acc


@dataclass(frozen=True)
class IdentityChannel:
    k: int

    @property
    def n_qubits(self) -> int:
        return self.k

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return rho


def decompose_depolarizing(ch: DepolarizingChannel) -> list[GaussianRotationChannel]:
    s2 = depolarizing_gaussian_variance(ch.k, ch.q)
    return [GaussianRotationChannel(p, s2) for p in all_paulis(ch.k, include_identity=False)]


def ptm(channel) -> np.ndarray:
    """Pauli transfer matrix ``R[i, j] = tr(P_i E(P_j)) / 2**k`` in IXYZ-lexicographic order."""
    k = channel.n_qubits
    if k > PTM_MAX_QUBITS:
        raise ValueError(f"PTM limited to {PTM_MAX_QUBITS} qubits, channel has {k}")
    basis = _pauli_basis(k)
    images = np.stack([channel.apply(pj) for pj in basis])
    return np.real(np.einsum("iab,jba->ij", basis, images)) / 2**k


@lru_cache(maxsize=None)
def _pauli_basis(k: int) -> np.ndarray:
    return np.stack([p.matrix() for p in all_paulis(k)])


def compose_ptms(mats: Sequence[np.ndarray]) -> np.ndarray:
    """PTM of applying the channels in sequence (first element acts first)."""
    return reduce(lambda acc, m: m @ acc, mats, np.eye(mats[0].shape[0]))


def anticommuting_count(p: PauliString) -> int:
    return sum(not p.commutes_with(o) for o in all_paulis(p.n_qubits, include_identity=False))


# --- noise specification and insertion --------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Depolarizing probabilities after 1-/2-qubit gates and on the readout layer.

    ``param_sigma2`` optionally adds Gaussian spread to the real rotation
    angles (scalar for all slots, or one value per slot).
    """

    q1: float = 0.0
    q2: float = 0.0
    q_readout: float = 0.0
    param_sigma2: float | tuple[float, ...] | None = None

    def __post_init__(self):
        for name, k in (("q1", 1), ("q2", 2), ("q_readout", 1)):
            q = getattr(self, name)
            if not 0.0 <= q < depolarizing_limit(k):
                raise ValueError(f"{name}={q} outside [0, {depolarizing_limit(k)})")
        if self.param_sigma2 is not None and not np.isscalar(self.param_sigma2):
            object.__setattr__(self, "param_sigma2", tuple(float(v) for v in self.param_sigma2))
        if self.param_sigma2 is not None and np.any(np.asarray(self.param_sigma2) < 0):
            raise ValueError("parameter variances must be non-negative")

    @classmethod
    def from_scale(cls, q_scale: float, c: dict, **kw) -> "NoiseSpec":
        """``q_k = (4**(k-1) - 1/4) * c_k * q_scale``; readout uses ``c['readout']`` or ``c['1']``."""
        c = {str(key): float(v) for key, v in c.items()}
        c1 = c.get("1", 0.0)
        q1 = 0.75 * c1 * q_scale
        q2 = 3.75 * c.get("2", 0.0) * q_scale
        qro = 0.75 * c.get("readout", c1) * q_scale
        return cls(q1=q1, q2=q2, q_readout=qro, **kw)

    @classmethod
    def from_dict(cls, doc: dict | None) -> "NoiseSpec":
        if not doc:
            return cls()
        doc = dict(doc)
        known = {"q1", "q2", "q_readout", "q_scale", "c", "param_sigma2"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown noise keys {sorted(unknown)}")
        ps = doc.pop("param_sigma2", None)
        if "q_scale" in doc:
            if {"q1", "q2", "q_readout"} & set(doc):
                raise ValueError("give either q_scale/c or q1/q2/q_readout, not both")
            return cls.from_scale(doc["q_scale"], doc.get("c", {"1": 1.0, "2": 1.0}), param_sigma2=ps)
        return cls(q1=doc.get("q1", 0.0), q2=doc.get("q2", 0.0), q_readout=doc.get("q_readout", 0.0),
                   param_sigma2=ps)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["param_sigma2"], tuple):
            d["param_sigma2"] = list(d["param_sigma2"])
        return d

    def is_noiseless(self) -> bool:
        ps = self.param_sigma2
        no_param = ps is None or not np.any(np.asarray(ps) > 0)
        return self.q1 == 0 and self.q2 == 0 and self.q_readout == 0 and no_param


@dataclass(frozen=True)
class RegistryEntry:
    slot: int
    position: int
    generator: PauliString
    sigma2: float
    p: float
    origin: str
    k: int
    q: float | None = None
    merged_with: int | None = None

    @property
    def merged(self) -> bool:
        return self.merged_with is not None


@dataclass(frozen=True)
class VirtualParameterRegistry:
    entries: tuple[RegistryEntry, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def n_virtual(self) -> int:
        return len(self.entries)

    @property
    def n_merged(self) -> int:
        return sum(e.merged for e in self.entries)

    def variances(self, n_params: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-slot variances; merged entries are accumulated onto their real slot."""
        real = np.zeros(n_params)
        virt = np.zeros(len(self.entries))
        for e in self.entries:
            if e.merged:
                real[e.merged_with] += e.sigma2
            else:
                virt[e.slot] = e.sigma2
        return real, virt

    def probabilities(self) -> np.ndarray:
        return np.array([e.p for e in self.entries])

    def total_variance(self) -> float:
        return float(sum(e.sigma2 for e in self.entries))

    def summary(self) -> dict:
        return {"n_virtual": self.n_virtual, "n_merged": self.n_merged,
                "total_variance": self.total_variance()}


def _gate_arity(g) -> int:
    return g.generator.weight if isinstance(g, Rotation) else len(g.qubits)


def insert_noise(circuit: Circuit, spec: NoiseSpec | None) -> tuple[Circuit, VirtualParameterRegistry]:
    """Insert depolarizing / parameter noise as ``NoiseSite`` gates.

    Every k-qubit gate is followed by the 4**k - 1 Pauli sites of
    ``D_{k, q_k}``; the site whose generator equals the preceding rotation's
    generator comes first and is flagged as merged with that rotation's slot.
    A readout layer of single-qubit depolarizing noise closes the circuit.
    """
    if spec is None or spec.is_noiseless():
        return circuit, VirtualParameterRegistry()
    if circuit.n_virtual:
        raise ValueError("circuit already carries noise sites")
    n = circuit.n_qubits
    qk = {1: spec.q1, 2: spec.q2}
    ps = spec.param_sigma2
    gates, entries = [], []

    def add(gen: PauliString, s2: float, origin: str, k: int, q, merged):
        slot = len(entries)
        p = stochastic_of_variance(s2)
        gates.append(NoiseSite(gen, p, slot))
        entries.append(RegistryEntry(slot, len(gates) - 1, gen, s2, p, origin, k, q, merged))

    def add_depolarizing(qubits, q, origin, lead: PauliString | None, lead_slot):
        k = len(qubits)
        s2 = depolarizing_gaussian_variance(k, q)
        local = [p.embed(n, qubits) for p in all_paulis(k, include_identity=False)]
        if lead is not None and lead in local:
            local.remove(lead)
            add(lead, s2, origin, k, q, lead_slot)
        for gen in local:
            add(gen, s2, origin, k, q, None)

    for g in circuit.gates:
        gates.append(g)
        if isinstance(g, NoiseSite):
            raise ValueError("circuit already carries noise sites")
        if isinstance(g, Rotation) and ps is not None:
            s2 = float(ps if np.isscalar(ps) else ps[g.slot])
            if s2 > 0:
                add(g.generator, s2, "parameter", g.generator.weight, None, g.slot)
        k = _gate_arity(g)
        q = qk.get(k)
        if q is None:
            if spec.q1 or spec.q2:
                raise ValueError(f"no depolarizing rate configured for {k}-qubit gates")
            continue
        if q > 0:
            lead = g.generator if isinstance(g, Rotation) else None
            lead_slot = g.slot if isinstance(g, Rotation) else None
            qubits = g.qubits if isinstance(g, Rotation) else tuple(sorted(g.qubits))
            add_depolarizing(qubits, q, "gate", lead, lead_slot)
    if spec.q_readout > 0:
        for qubit in range(n):
            add_depolarizing((qubit,), spec.q_readout, "readout", None, None)
    return Circuit(n, gates), VirtualParameterRegistry(tuple(entries))


def shift_gate_channels(entry: RegistryEntry, n_qubits: int) -> list[tuple[PauliString, float]]:
    """Stochastic channels emulating the depolarizing noise of an inserted shift gate."""
    if entry.q is None or entry.q == 0:
        s2 = entry.sigma2
        return [(entry.generator, stochastic_of_variance(s2))]
    qubits = entry.generator.qubits
    k = len(qubits)
    p = depolarizing_site_probability(k, entry.q)
    return [(P.embed(n_qubits, qubits), p) for P in all_paulis(k, include_identity=False)]


# --- verification suite ------------------------------------------------------


def verify_channel_suite(n_random: int = 200, seed: int = 0, variance_fn=variance_of_stochastic,
                         tol: float = 1e-10) -> list[dict]:
    """PTM checks of the stochastic/Gaussian equivalence and the depolarizing decomposition.

    ``variance_fn`` is the probability-to-variance map under test.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_random):
        k = int(rng.integers(1, 3))
        gen = all_paulis(k, include_identity=False)[int(rng.integers(0, 4**k - 1))]
        p = float(rng.uniform(0.0, 0.45))
        a = ptm(GaussianRotationChannel(gen, variance_fn(p)))
        b = ptm(StochasticPauliChannel(gen, p))
        worst = max(worst, float(np.max(np.abs(a - b))))
    results = [{"suite": "stochastic_vs_gaussian", "cases": n_random, "max_deviation": worst}]
    for k in (1, 2):
        dev = 0.0
        for q in (1e-4, 1e-2, 0.1):
            ch = DepolarizingChannel(k, q)
            s2 = variance_fn(depolarizing_site_probability(k, q))
            parts = [ptm(GaussianRotationChannel(p, s2)) for p in all_paulis(k, include_identity=False)]
            dev = max(dev, float(np.max(np.abs(compose_ptms(parts) - ptm(ch)))))
        results.append({"suite": f"depolarizing_decomposition_k{k}", "cases": 3, "max_deviation": dev})
    for r in results:
        r["passed"] = r["max_deviation"] < tol
    return results
