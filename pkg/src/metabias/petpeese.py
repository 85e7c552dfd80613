"""Conditional PET-PEESE estimator built on the Egger regression.

PET regresses the standardized effect on precision,
``y_i/se_i = alpha0 + alpha1/se_i``; ``alpha1`` estimates the treatment
effect.  When the two-sided t-test rejects ``alpha1 = 0``, PEESE takes over:
``y_i = gamma0 + gamma1 * var_i`` weighted by ``1/var_i``, with ``gamma0``
the bias-adjusted estimate.  Intervals use t quantiles on m-2 degrees of
freedom because study counts are small.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .effects import EffectEstimate
from .errors import InsufficientStudies, SingularDesign
from .numerics import t_cdf, t_quantile, wls_fit

__all__ = ["PetFit", "PetPeeseResult", "pet", "pet_peese"]

PET = "pet"
PEESE = "peese"


class PetFit(NamedTuple):
    alpha0: float
    alpha1: float
    cov: np.ndarray
    t_stat: float
    p_value: float


@dataclass(frozen=True)
class PetPeeseResult:
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    branch: str
    pet_t: float
    pet_p: float
    pet_alpha0: float
    peese_gamma1: float | None


def pet(effects: list[EffectEstimate]) -> PetFit:
    """Egger regression with the precision-effect t-test on alpha1."""
    m = len(effects)
    if m < 3:
        raise InsufficientStudies(f"pet needs >= 3 studies, got {m}")
    se = np.array([e.se for e in effects])
    if np.ptp(se) == 0.0:
        raise SingularDesign("all standard errors equal; 1/se is constant")
    y = np.array([e.value for e in effects])
    fit = wls_fit(1.0 / se, y / se, np.ones(m))
    alpha0, alpha1 = fit.coefficients
    se_a1 = fit.se(1)
    if se_a1 > 0.0:
        t_stat = alpha1 / se_a1
        p_value = 2.0 * (1.0 - t_cdf(abs(t_stat), m - 2))
    else:
        # perfect fit: the slope is known exactly
        t_stat = math.inf if alpha1 != 0.0 else 0.0
        p_value = 0.0 if alpha1 != 0.0 else 1.0
    return PetFit(alpha0=alpha0, alpha1=alpha1, cov=fit.covariance,
                  t_stat=t_stat, p_value=p_value)


def pet_peese(effects: list[EffectEstimate],
              branch_alpha: float = 0.05) -> PetPeeseResult:
    """PET estimate, switching to PEESE when the PET test finds an effect."""
    m = len(effects)
    if m < 4:
        raise InsufficientStudies(f"pet_peese needs >= 4 studies, got {m}")
    pet_fit = pet(effects)
    t_crit = t_quantile(0.975, m - 2)
    if pet_fit.p_value >= branch_alpha:
        est = pet_fit.alpha1
        se = math.sqrt(max(pet_fit.cov[1, 1], 0.0))
        return PetPeeseResult(estimate=est, se=se,
                              ci_low=est - t_crit * se,
                              ci_high=est + t_crit * se,
                              branch=PET, pet_t=pet_fit.t_stat,
                              pet_p=pet_fit.p_value,
                              pet_alpha0=pet_fit.alpha0, peese_gamma1=None)
    variance = np.array([e.variance for e in effects])
    if np.ptp(variance) == 0.0:
        raise SingularDesign("all variances equal; gamma1 is unidentified")
    y = np.array([e.value for e in effects])
    fit = wls_fit(variance, y, 1.0 / variance)
    gamma0, gamma1 = fit.coefficients
    se = fit.se(0)
    return PetPeeseResult(estimate=gamma0, se=se,
                          ci_low=gamma0 - t_crit * se,
                          ci_high=gamma0 + t_crit * se,
                          branch=PEESE, pet_t=pet_fit.t_stat,
                          pet_p=pet_fit.p_value,
                          pet_alpha0=pet_fit.alpha0, peese_gamma1=gamma1)
