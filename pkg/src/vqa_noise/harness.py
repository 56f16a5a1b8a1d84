"""Toy-model experiments: random-axis ansatz, planted-spectrum target, noisy sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize as sciopt
from scipy import stats

from vqa_noise.bounds import SpectrumInfo, leading_error, relative_errors, rough_bounds
from vqa_noise.channels import NoiseSpec, insert_noise
from vqa_noise.circuit import Circuit, FixedGate, SpectralObservable, basis_state, rotation_layer
from vqa_noise.cost import CostFunction, NoisyEvaluator, gradient

log = logging.getLogger(__name__)

CSV_COLUMNS = [
    "sweep_value", "seed", "epsilon", "R1", "Rmax", "rough_lower", "rough_upper",
    "thm1_leading", "thm1_remainder", "C_noisy_opt", "C_noiseless_opt", "evals", "wall_ms",
]


def build_ansatz(n: int, d: int, seed: int) -> Circuit:
    """``d`` layers of random-axis single-qubit rotations, each followed by a CZ chain."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    gates = []
    for layer in range(d):
        letters = rng.choice(list("XYZ"), size=n)
        gates += rotation_layer(n, letters, first_slot=layer * n)
        gates += [FixedGate("CZ", (q, q + 1)) for q in range(n - 1)]
    return Circuit(n, gates)


@dataclass(frozen=True)
class ToyModelSpec:
    n: int = 4
    depth: int = 2
    E0: float = 1.0
    E1: float = 51.0
    Emax: float = 100.0
    circuit_seed: int = 0
    spectrum_seed: int = 1
    theta_seed: int = 2

    def __post_init__(self):
        if not self.E0 < self.E1 <= self.Emax:
            raise ValueError("need E0 < E1 <= Emax")
        if self.n < 2 or self.depth < 1:
            raise ValueError("need n >= 2 and depth >= 1")

    @classmethod
    def from_seed(cls, seed: int, **kw) -> "ToyModelSpec":
        c, s, t = (int(x.generate_state(1)[0]) for x in np.random.SeedSequence(seed).spawn(3))
        return cls(circuit_seed=c, spectrum_seed=s, theta_seed=t, **kw)


def build_toy_hamiltonian(spec: ToyModelSpec, ansatz: Circuit | None = None):
    """Planted target ``H = sum_i E_i U(theta_opt)|i><i|U(theta_opt)^dagger``.

    Returns ``(observable, theta_opt)``. The interior eigenvalues are drawn
    uniformly on ``(E1, Emax)`` and sorted.
    """
    ansatz = build_ansatz(spec.n, spec.depth, spec.circuit_seed) if ansatz is None else ansatz
    dim = 2**spec.n
    u = np.sort(np.random.default_rng(spec.spectrum_seed).random(dim - 3))
    energies = np.concatenate([[spec.E0, spec.E1], spec.E1 + u * (spec.Emax - spec.E1), [spec.Emax]])
    theta_opt = np.random.default_rng(spec.theta_seed).uniform(0, 2 * np.pi, ansatz.n_params)
    return SpectralObservable(energies, ansatz, theta_opt), theta_opt


@dataclass
class ToyModel:
    spec: ToyModelSpec
    ansatz: Circuit = field(init=False)
    hamiltonian: SpectralObservable = field(init=False)
    theta_opt: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ansatz = build_ansatz(self.spec.n, self.spec.depth, self.spec.circuit_seed)
        self.hamiltonian, self.theta_opt = build_toy_hamiltonian(self.spec, self.ansatz)

    @property
    def spectrum(self) -> SpectrumInfo:
        return SpectrumInfo.from_energies(self.hamiltonian.energies,
                                          [(self.spec.E0, self.spec.Emax)])

    def cost(self, noise: NoiseSpec | None = None):
        circuit, registry = insert_noise(self.ansatz, noise)
        return CostFunction(circuit, [(self.hamiltonian, basis_state(self.spec.n))]), registry

    def evaluator(self, noise: NoiseSpec | None = None, **kw) -> NoisyEvaluator:
        cf, reg = self.cost(noise)
        return NoisyEvaluator(cf, reg, **kw)


# --- optimization ---------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 5
    maxiter: int = 500
    gtol: float = 1e-6
    seed: int = 0


@dataclass
class OptimizeResult:
    theta: np.ndarray
    value: float
    grad_norm: float
    n_iter: int
    converged: bool
    trace: list = field(default_factory=list)
    restart_values: list = field(default_factory=list)


def _objective(target):
    def f(theta):
        v = target.value(theta)
        v = v[0] if isinstance(v, tuple) else v
        if not math.isfinite(v):
            raise FloatingPointError(f"non-finite cost at theta={theta}")
        return v

    return f


def optimize(target, config: OptimizerConfig = OptimizerConfig(), theta0=None) -> OptimizeResult:
    """BFGS with parameter-shift gradients, best of ``config.restarts`` starts.

    Starts are uniform on [0, 2 pi); ``theta0`` replaces the first one.
    """
    f = _objective(target)
    rng = np.random.default_rng(config.seed)
    starts = [rng.uniform(0, 2 * np.pi, target.n_params) for _ in range(config.restarts)]
    if theta0 is not None:
        starts[0] = np.asarray(theta0, dtype=float)
    best = None
    values = []
    for x0 in starts:
        trace = []
        res = sciopt.minimize(f, x0, jac=lambda th: gradient(target, th), method="BFGS",
                              callback=lambda xk: trace.append(f(xk)),
                              options={"gtol": config.gtol, "maxiter": config.maxiter})
        gnorm = float(np.linalg.norm(gradient(target, res.x)))
        values.append(float(res.fun))
        cand = OptimizeResult(res.x, float(res.fun), gnorm, int(res.nit),
                              bool(gnorm < config.gtol * 10 or res.success), trace)
        if best is None or cand.value < best.value:
            best = cand
    best.restart_values = values
    return best


# --- sweeps ---------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    """Rate sweep: ``q1 = q``, ``q2 = q_readout = ratio * q``. Gap sweep: fixed rates, ``E1 = E0 + gap``."""

    variable: str = "rate"
    values: tuple = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3)
    seeds: tuple = (0, 1, 2)
    two_qubit_ratio: float = 10.0
    readout_ratio: float = 10.0
    q1: float = 1e-4
    q2: float = 1e-3
    q_readout: float = 1e-3
    gap: float = 50.0
    n: int = 4
    depth: int = 2
    E0: float = 1.0
    Emax: float = 100.0
    mode: str = "exact"
    samples: int = 100_000
    optimizer: OptimizerConfig = OptimizerConfig()
    start_at_planted: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.variable not in ("rate", "gap"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals) or list(vals) != sorted(vals):
            raise ValueError("sweep values must be non-negative and sorted")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if isinstance(self.optimizer, dict):
            object.__setattr__(self, "optimizer", OptimizerConfig(**self.optimizer))

    def noise_at(self, value: float) -> NoiseSpec:
        if self.variable == "rate":
            return NoiseSpec(q1=value, q2=self.two_qubit_ratio * value,
                             q_readout=self.readout_ratio * value)
        return NoiseSpec(q1=self.q1, q2=self.q2, q_readout=self.q_readout)

    def toy_spec(self, seed: int, value: float) -> ToyModelSpec:
        gap = value if self.variable == "gap" else self.gap
        return ToyModelSpec.from_seed(seed, n=self.n, depth=self.depth, E0=self.E0,
                                      E1=self.E0 + gap, Emax=self.Emax)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunRecord:
    config: dict
    rows: list
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k]) for k in CSV_COLUMNS})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "rows": self.rows, "summary": self.summary},
                          indent=2, default=_jsonable)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def run_point(config: SweepConfig, seed: int, value: float) -> dict:
    t0 = time.perf_counter()
    model = ToyModel(config.toy_spec(seed, value))
    ev = model.evaluator(config.noise_at(value), mode=config.mode, samples=config.samples,
                         seed=seed)
    opt_cfg = OptimizerConfig(config.optimizer.restarts, config.optimizer.maxiter,
                              config.optimizer.gtol, seed=config.optimizer.seed + seed)
    res = optimize(ev, opt_cfg, theta0=model.theta_opt if config.start_at_planted else None)
    theta = res.theta
    noisy, se = ev.value(theta)
    cf = ev.cost
    clean = cf.value(theta)
    spectrum = model.spectrum
    real_var, virt_var = ev.registry.variances(cf.n_params)
    total = float(real_var.sum() + virt_var.sum())
    lo, hi = rough_bounds(spectrum, [total])
    lead, rem = leading_error(cf, theta, real_var, virt_var)
    r1, rmax = relative_errors(noisy, spectrum)
    return {
        "sweep_value": value, "seed": seed, "epsilon": noisy - clean, "R1": r1, "Rmax": rmax,
        "rough_lower": lo, "rough_upper": hi, "thm1_leading": lead, "thm1_remainder": rem,
        "C_noisy_opt": noisy, "C_noiseless_opt": clean, "evals": ev.n_evaluations,
        "wall_ms": round(1000 * (time.perf_counter() - t0), 3),
        "standard_error": se, "total_variance": total, "delta": clean - spectrum.E0,
        "grad_norm": res.grad_norm, "converged": res.converged, "theta_star": theta.tolist(),
        "gap": spectrum.gap, "bracketed": bool(lo <= noisy - clean <= hi),
    }


def summarize(config: SweepConfig, rows: list) -> dict:
    vals = np.array(config.values)
    eps = np.array([[r["epsilon"] for r in rows if r["sweep_value"] == v] for v in vals])
    mean = eps.mean(axis=1)
    out = {
        "points": len(rows),
        "all_bracketed": all(r["bracketed"] for r in rows),
        "mean_epsilon": mean.tolist(),
    }
    if config.variable == "rate":
        pos = (vals > 0) & (mean > 0)
        if pos.sum() >= 2:
            fit = stats.linregress(np.log10(vals[pos]), np.log10(mean[pos]))
            out["loglog_slope"] = float(fit.slope)
            out["loglog_r2"] = float(fit.rvalue**2)
    else:
        gaps = np.array([r["gap"] for r in rows])
        rho = stats.spearmanr(gaps, [r["epsilon"] for r in rows]).statistic
        out["spearman_gap_epsilon"] = float(rho)
        out["spearman_gap_mean_epsilon"] = float(stats.spearmanr(vals, mean).statistic)
        out["monotone_mean_epsilon"] = bool(np.all(np.diff(mean) > 0))
    ratio = [r["R1"] / (r["total_variance"] / 4) for r in rows if r["total_variance"] > 0]
    if ratio:
        out["R1_over_rough_min"] = float(min(ratio))
        out["R1_over_rough_max"] = float(max(ratio))
    return out


def run_sweep(config: SweepConfig) -> RunRecord:
    """One row per (value, seed); rows are ordered by value, then seed."""
    jobs = [(s, v) for v in config.values for s in config.seeds]

    def job(sv):
        s, v = sv
        try:
            return run_point(config, s, v)
        except Exception as exc:  # per-point failure is recorded, the sweep continues
            log.warning("sweep point value=%s seed=%s failed: %s", v, s, exc)
            return {"sweep_value": v, "seed": s, "error": repr(exc)}

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            rows = list(pool.map(job, jobs))
    else:
        rows = [job(j) for j in jobs]
    ok = [r for r in rows if "error" not in r]
    summary = summarize(config, ok) if len(ok) == len(rows) else {"failed_points": len(rows) - len(ok)}
    return RunRecord(config.to_dict(), rows, summary)


def plot_record(record: RunRecord, path: Path, variable: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in record.rows if "error" not in r]
    vals = sorted({r["sweep_value"] for r in rows})

    def mean(key):
        return [np.mean([r[key] for r in rows if r["sweep_value"] == v]) for v in vals]

    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.plot(vals, mean("epsilon"), "o-", label="measured error")
    ax.plot(vals, mean("rough_upper"), "--", label="rough upper")
    ax.plot(vals, mean("rough_lower"), ":", label="rough lower")
    if variable == "rate":
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("single-qubit error rate q")
    else:
        ax.set_xlabel("gap E1 - E0")
    ax.set_ylabel("error at noisy optimum")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
