"""Fixed-effects and DerSimonian-Laird random-effects pooling.

These are the baseline estimator and the building blocks reused by every
adjustment method (Trim & Fill re-fits, the limit meta-analysis tau, the
Copas starting values).  95% intervals use normal quantiles; tau-squared is
clamped at zero, the usual convention for the DL moment estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .effects import EffectEstimate
from .errors import EmptyInput
from .numerics import Z_975

__all__ = ["MetaResult", "fixed_effects", "dl_random_effects", "METHODS"]

METHODS = ("fixed", "dl_random", "copas", "p_uniform", "pet_peese",
           "trim_fill", "limit_meta")


@dataclass(frozen=True)
class MetaResult:
    """Pooled estimate with uncertainty for one pooling/adjustment method."""

    estimate: float
    se: float
    ci_low: float
    ci_high: float
    tau2: float
    q_stat: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def _arrays(effects: list[EffectEstimate]) -> tuple[np.ndarray, np.ndarray]:
    if not effects:
        raise EmptyInput("no effect estimates supplied")
    y = np.array([e.value for e in effects], dtype=np.float64)
    v = np.array([e.variance for e in effects], dtype=np.float64)
    return y, v


def fixed_effects(effects: list[EffectEstimate]) -> MetaResult:
    """Inverse-variance weighted fixed-effects pooling."""
    y, v = _arrays(effects)
    w = 1.0 / v
    sw = float(np.sum(w))
    est = float(np.sum(w * y)) / sw
    se = math.sqrt(1.0 / sw)
    q = float(np.sum(w * (y - est) ** 2))
    return MetaResult(estimate=est, se=se,
                      ci_low=est - Z_975 * se, ci_high=est + Z_975 * se,
                      tau2=0.0, q_stat=q, method="fixed")


def dl_random_effects(effects: list[EffectEstimate]) -> MetaResult:
    """Random-effects pooling with the DerSimonian-Laird tau-squared.

    A single study cannot identify tau-squared; in that case the fixed-effects
    result is returned with a ``single_study`` warning flag in diagnostics.
    """
    y, v = _arrays(effects)
    m = y.size
    if m == 1:
        fe = fixed_effects(effects)
        return MetaResult(estimate=fe.estimate, se=fe.se, ci_low=fe.ci_low,
                          ci_high=fe.ci_high, tau2=0.0, q_stat=fe.q_stat,
                          method="dl_random",
                          diagnostics={"single_study": True})
    w = 1.0 / v
    sw = float(np.sum(w))
    est_fixed = float(np.sum(w * y)) / sw
    q = float(np.sum(w * (y - est_fixed) ** 2))
    c = sw - float(np.sum(w * w)) / sw
    tau2 = max(0.0, (q - (m - 1)) / c) if c > 0.0 else 0.0

    w_re = 1.0 / (v + tau2)
    sw_re = float(np.sum(w_re))
    est = float(np.sum(w_re * y)) / sw_re
    se = math.sqrt(1.0 / sw_re)
    return MetaResult(estimate=est, se=se,
                      ci_low=est - Z_975 * se, ci_high=est + Z_975 * se,
                      tau2=tau2, q_stat=q, method="dl_random")
