"""Analytic estimates and bounds for the noise-induced cost error.

``eps(theta) = C_noisy(theta) - C(theta)`` is estimated from shift-rule
second derivatives, the Fubini-Study diagonal, and the spectrum of the
target operator. Variances are split into real-parameter slots and virtual
(noise-site) slots; see :meth:`VirtualParameterRegistry.variances`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from vqa_noise.channels import variance_of_stochastic
from vqa_noise.cost import CostFunction, fubini_diag, gradient, second_derivative

DEGENERACY_TOL = 1e-9


class DegenerateSpectrumError(ValueError):
    """The ground space is (numerically) degenerate; gap-based bounds do not apply."""


@dataclass(frozen=True)
class SpectrumInfo:
    E0: float
    E1: float
    Emax: float
    per_term: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.E0 <= self.E1 <= self.Emax:
            raise ValueError("need E0 <= E1 <= Emax")

    @property
    def gap(self) -> float:
        return self.E1 - self.E0

    @property
    def width(self) -> float:
        return self.Emax - self.E0

    @property
    def norm(self) -> float:
        return max(abs(self.E0), abs(self.Emax))

    @property
    def total_width(self) -> float:
        """``sum_l (E_max,l - E_0,l)``, falling back to the full width."""
        if self.per_term:
            return sum(hi - lo for lo, hi in self.per_term)
        return self.width

    def require_gap(self):
        if self.gap < DEGENERACY_TOL:
            raise DegenerateSpectrumError(
                f"E1 - E0 = {self.gap:.3e} is below the degeneracy tolerance {DEGENERACY_TOL}")

    @classmethod
    def from_energies(cls, energies, per_term=()) -> "SpectrumInfo":
        e = np.sort(np.asarray(energies, dtype=float))
        return cls(float(e[0]), float(e[1]), float(e[-1]), tuple(per_term))

    @classmethod
    def from_cost(cls, cf: CostFunction) -> "SpectrumInfo":
        """Spectrum of ``H = sum_l H_l`` (single-term costs avoid a dense sum)."""
        per_term = tuple(cf.term_ranges())
        if len(cf.terms) == 1:
            return cls.from_energies(cf.terms[0][0].spectrum, per_term)
        h = sum(obs.to_dense() for obs, _ in cf.terms)
        return cls.from_energies(np.linalg.eigvalsh(h), per_term)


def _slots(real_var, virtual_var):
    real = np.asarray(real_var, dtype=float).reshape(-1)
    virt = np.zeros(0) if virtual_var is None else np.asarray(virtual_var, dtype=float).reshape(-1)
    if np.any(real < 0) or np.any(virt < 0):
        raise ValueError("variances must be non-negative")
    out = [("real", i, s) for i, s in enumerate(real) if s > 0]
    out += [("virtual", j, s) for j, s in enumerate(virt) if s > 0]
    return out, float(real.sum() + virt.sum())


def leading_error(cf: CostFunction, theta, real_var, virtual_var=None) -> tuple[float, float]:
    """Return ``(leading, remainder_bound)``.

    ``leading = 1/2 sum_i d2C/dtheta_i^2 sigma_i^2`` over real and virtual
    slots; ``|eps - leading| <= sum_l (E_max,l - E_0,l) / 16 * (sum sigma^2)^2``.
    """
    slots, total = _slots(real_var, virtual_var)
    if not slots:
        return 0.0, 0.0
    base = cf.value(theta)
    lead = 0.5 * sum(second_derivative(cf, theta, i, which, base) * s for which, i, s in slots)
    return float(lead), cf.spectral_width() / 16.0 * total**2


def leading_error_stochastic(cf: CostFunction, theta, real_var, probabilities,
                             approximate: bool = False) -> float:
    """Leading error for stochastic Pauli sites of probability ``p_j``.

    With ``approximate=False`` the site variance is ``-2 log(1 - 2 p_j)``;
    otherwise the small-p form ``2 sum_j d2C/dtheta'_j^2 p_j`` is used.
    """
    p = np.asarray(probabilities, dtype=float).reshape(-1)
    if np.any(p < 0) or np.any(p >= 0.5):
        raise ValueError("probabilities must lie in [0, 1/2)")
    if approximate:
        virt = 4.0 * p
    else:
        virt = np.array([variance_of_stochastic(float(v)) for v in p])
    return leading_error(cf, theta, real_var, virt)[0]


def stochastic_remainder_order(cf: CostFunction, real_var, probabilities) -> float:
    """Size of the dropped terms, constant factor 1."""
    return cf.spectral_width() * (float(np.sum(real_var)) ** 2 + float(np.sum(probabilities)) ** 2)


def _sum_g_sigma2(cf: CostFunction, theta, slots) -> float:
    return float(sum(fubini_diag(cf, theta, i, which) * s for which, i, s in slots))


def thm2_bounds(cf: CostFunction, theta, spectrum: SpectrumInfo, real_var,
                virtual_var=None) -> tuple[float, float]:
    """Lower and upper bounds on ``eps(theta)`` from the gap, width and metric diagonal."""
    spectrum.require_gap()
    slots, total = _slots(real_var, virtual_var)
    if not slots:
        return 0.0, 0.0
    g = _sum_g_sigma2(cf, theta, slots)
    c0 = max(cf.value(theta) - spectrum.E0, 0.0)
    gap, width = spectrum.gap, spectrum.width
    quad = width / 16.0 * total**2
    lower = gap * g - (math.sqrt(gap * c0) + 0.25 * c0) * total - quad
    upper = width * g + (math.sqrt(width * c0) - 0.25 * c0) * total + quad
    return float(lower), float(upper)


def thm2_simplified(cf: CostFunction, theta, spectrum: SpectrumInfo, real_var,
                    virtual_var=None) -> tuple[float, float]:
    """Gap- and width-weighted metric sums with the precision and quadratic terms dropped."""
    slots, _ = _slots(real_var, virtual_var)
    g = _sum_g_sigma2(cf, theta, slots)
    return spectrum.gap * g, spectrum.width * g


def rough_bounds(spectrum: SpectrumInfo, variances) -> tuple[float, float]:
    """Spectrum-only bracket, with every metric diagonal replaced by 1/4."""
    total = float(np.sum(variances))
    if total < 0:
        raise ValueError("variances must be non-negative")
    quad = total**2 / 16.0
    lower = spectrum.gap / 4.0 * total - spectrum.width * quad
    upper = spectrum.width * (total / 4.0 + quad)
    return lower, upper


def rough_upper_norm(spectrum: SpectrumInfo, variances) -> float:
    total = float(np.sum(variances))
    return spectrum.norm * (total / 2.0 + total**2 / 8.0)


def lemma2_bounds(cf: CostFunction, theta, i: int, spectrum: SpectrumInfo,
                  which: str = "real") -> tuple[float, float]:
    """Bracket for the shift-rule second derivative with respect to slot ``i``."""
    spectrum.require_gap()
    g = fubini_diag(cf, theta, i, which)
    c0 = max(cf.value(theta) - spectrum.E0, 0.0)
    lb = 2 * spectrum.gap * g - 0.5 * c0 - math.sqrt(spectrum.gap * c0)
    ub = 2 * spectrum.width * g - 0.5 * c0 + math.sqrt(spectrum.width * c0)
    return lb, ub


def fidelity_bounds(energy: float, spectrum: SpectrumInfo, tol: float = 1e-12) -> tuple[float, float]:
    """Bounds on the ground-state infidelity ``1 - <psi_0|rho|psi_0>`` of a state with this energy."""
    spectrum.require_gap()
    if not spectrum.E0 - tol <= energy <= spectrum.Emax + tol:
        raise ValueError(f"energy {energy} outside [{spectrum.E0}, {spectrum.Emax}]")
    excess = max(energy - spectrum.E0, 0.0)
    return excess / spectrum.width, excess / spectrum.gap


def relative_errors(noisy_value: float, spectrum: SpectrumInfo) -> tuple[float, float]:
    """``(R1, Rmax)``: excess energy over the gap and over the full width."""
    excess = noisy_value - spectrum.E0
    return excess / spectrum.gap, excess / spectrum.width


def _oom(v: float) -> str:
    return f"{v:.0e}"


def scaling_helpers(n: float, M: float, r: float, eps: float | None = None,
                    q: float | None = None) -> dict:
    """Order-of-magnitude noise/precision scalings with all constants set to 1.

    Given a target precision ``eps`` returns the sufficient error probability
    without mitigation (eps / (n^r M)), with mitigation (sqrt(eps) / (n^(r/2) M))
    and the necessary one (eps / M). Given ``q`` returns the matching precisions.
    """
    if (eps is None) == (q is None):
        raise ValueError("give exactly one of eps or q")
    if min(n, M, r) <= 0:
        raise ValueError("n, M and r must be positive")
    out = {"n": n, "M": M, "r": r, "order_of_magnitude": True}
    if eps is not None:
        if eps <= 0:
            raise ValueError("eps must be positive")
        vals = {
            "q_sufficient": eps / (n**r * M),
            "q_sufficient_mitigated": math.sqrt(eps) / (n ** (r / 2) * M),
            "q_necessary": eps / M,
        }
        out["eps"] = eps
    else:
        if q <= 0:
            raise ValueError("q must be positive")
        vals = {
            "eps_guaranteed": q * n**r * M,
            "eps_guaranteed_mitigated": (q * n ** (r / 2) * M) ** 2,
            "eps_unreachable_below": q * M,
        }
        out["q"] = q
    out.update(vals)
    out["rounded"] = {k: _oom(v) for k, v in vals.items()}
    return out


def hessian_trace_diag(cf: CostFunction, theta, weights=None, grad_tol: float = 1e-4) -> float:
    """Sum of diagonal second derivatives at a local minimum.

    ``weights`` are optional per-slot rescaling factors ``c_k``.
    """
    gnorm = float(np.linalg.norm(gradient(cf, theta)))
    if gnorm > grad_tol:
        raise ValueError(f"gradient norm {gnorm:.2e} above {grad_tol}; not a local minimum")
    base = cf.value(theta)
    w = np.ones(cf.n_params) if weights is None else np.asarray(weights, dtype=float)
    return float(sum(w[i] * second_derivative(cf, theta, i, "real", base) for i in range(cf.n_params)))


@dataclass(frozen=True)
class BoundReport:
    leading: float
    remainder_bound: float
    thm2_lower: float
    thm2_upper: float
    simplified_lower: float
    simplified_upper: float
    rough_lower: float
    rough_upper: float
    R1: float
    Rmax: float
    delta: float
    noisy_value: float
    noiseless_value: float
    total_variance: float

    @property
    def epsilon(self) -> float:
        return self.noisy_value - self.noiseless_value

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon"] = self.epsilon
        return d


def bound_report(cf: CostFunction, theta, spectrum: SpectrumInfo, real_var, virtual_var,
                 noisy_value: float) -> BoundReport:
    lead, rem = leading_error(cf, theta, real_var, virtual_var)
    lo, hi = thm2_bounds(cf, theta, spectrum, real_var, virtual_var)
    slo, shi = thm2_simplified(cf, theta, spectrum, real_var, virtual_var)
    total = float(np.sum(real_var) + (0.0 if virtual_var is None else np.sum(virtual_var)))
    rlo, rhi = rough_bounds(spectrum, [total])
    r1, rmax = relative_errors(noisy_value, spectrum)
    c = cf.value(theta)
    return BoundReport(lead, rem, lo, hi, slo, shi, rlo, rhi, r1, rmax, c - spectrum.E0,
                       noisy_value, c, total)
