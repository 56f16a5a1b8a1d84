"""Error mitigation by subtracting the leading noise term.

Every second derivative is estimated from noisy evaluations only:
``h_i = (C_noisy(theta + pi e_i) - C_noisy(theta)) / 2`` for real slots, and
the same with the virtual rotation of a noise site shifted by pi. Then

    C_mit = C_noisy(theta) - 1/2 sum_i h_i sigma_i^2
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from vqa_noise.channels import variance_of_stochastic
from vqa_noise.cost import NoisyEvaluator

SKIP_VARIANCE = 1e-15


@dataclass(frozen=True)
class SlotContribution:
    slot: str
    h: float
    sigma2: float
    term: float


@dataclass(frozen=True)
class MitigationReport:
    raw_noisy: float
    mitigated: float
    contributions: tuple[SlotContribution, ...] = field(default_factory=tuple)
    evaluations: int = 0
    remainder_bound: float = 0.0
    raw_standard_error: float = 0.0

    @property
    def correction(self) -> float:
        return float(sum(c.term for c in self.contributions))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["contributions"] = [asdict(c) for c in self.contributions]
        return d


def _merge(ev: NoisyEvaluator, virtual_var):
    """Move merged virtual variances onto their real slot."""
    real = np.zeros(ev.n_params)
    virt = np.array(virtual_var, dtype=float)
    for e in ev.registry.entries:
        if e.merged:
            real[e.merged_with] += virt[e.slot]
            virt[e.slot] = 0.0
    return real, virt


def mitigate(ev: NoisyEvaluator, theta, real_var=None, virtual_var=None,
             precision: float | None = None) -> MitigationReport:
    """Mitigated cost at ``theta``.

    Variances default to the evaluator's registry, with merged sites folded
    into their real slot so each such slot is shifted once.
    """
    theta = np.asarray(theta, dtype=float)
    if real_var is None and virtual_var is None:
        real_var, virtual_var = ev.registry.variances(ev.n_params)
    real_var = np.zeros(ev.n_params) if real_var is None else np.asarray(real_var, dtype=float)
    virtual_var = np.zeros(ev.n_virtual) if virtual_var is None else np.asarray(virtual_var, dtype=float)
    if real_var.shape != (ev.n_params,) or virtual_var.shape != (ev.n_virtual,):
        raise ValueError("variance vectors do not match the evaluator's slot counts")

    start = ev.n_evaluations
    raw, raw_se = ev.value(theta)
    contributions = []
    for i, s2 in enumerate(real_var):
        if s2 < SKIP_VARIANCE:
            continue
        shifted = theta.copy()
        shifted[i] += math.pi
        h = 0.5 * (ev.value(shifted)[0] - raw)
        contributions.append(SlotContribution(f"real:{i}", h, float(s2), 0.5 * h * s2))
    for j, s2 in enumerate(virtual_var):
        if s2 < SKIP_VARIANCE:
            continue
        virtual = np.zeros(ev.n_virtual)
        virtual[j] = math.pi
        h = 0.5 * (ev.value(theta, virtual, ev.shift_channels(j))[0] - raw)
        contributions.append(SlotContribution(f"virtual:{j}", h, float(s2), 0.5 * h * s2))

    total = float(real_var.sum() + virtual_var.sum())
    remainder = ev.cost.spectral_width() / 16.0 * total**2
    if precision is not None and remainder > precision:
        warnings.warn(
            f"expected residual {remainder:.3e} exceeds the requested precision {precision:.3e}",
            RuntimeWarning, stacklevel=2)
    mitigated = raw - sum(c.term for c in contributions)
    return MitigationReport(float(raw), float(mitigated), tuple(contributions),
                            ev.n_evaluations - start, remainder, raw_se)


def mitigate_stochastic(ev: NoisyEvaluator, theta, probabilities=None, approximate: bool = False,
                        real_var=None, precision: float | None = None) -> MitigationReport:
    """Mitigation with site variances derived from stochastic probabilities.

    ``approximate=True`` uses ``4 p`` instead of ``-2 log(1 - 2 p)``.
    """
    p = ev.registry.probabilities() if probabilities is None else np.asarray(probabilities, float)
    if p.shape != (ev.n_virtual,):
        raise ValueError("need one probability per noise site")
    if approximate:
        virt = 4.0 * p
    else:
        virt = np.array([variance_of_stochastic(float(v)) for v in p])
    real, virt = _merge(ev, virt)
    if real_var is not None:
        real = real + np.asarray(real_var, dtype=float)
    return mitigate(ev, theta, real, virt, precision=precision)
