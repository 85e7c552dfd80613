"""Limit meta-analysis: bias-parameter regression on a generalized radial plot.

The extended random-effects model adds a bias term alpha; its estimates come
from ordinary least squares of ``y_i/(se_i + tau)`` on ``1/(se_i + tau)``
(slope = effect, intercept = alpha), with tau taken as the square root of the
DL tau-squared.  The adjusted estimator is ``slope + tau * intercept``; its
variance follows by the delta method holding tau fixed, and the interval is
normal.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .effects import EffectEstimate
from .errors import InsufficientStudies, SingularDesign
from .numerics import Z_975, wls_fit
from .pooling import MetaResult, dl_random_effects

__all__ = ["LimitMetaResult", "limit_meta"]


@dataclass(frozen=True)
class LimitMetaResult:
    pooled: MetaResult
    alpha_hat: float
    tau_hat: float
    slope: float
    intercept: float
    reg_cov: np.ndarray


def limit_meta(effects: list[EffectEstimate]) -> LimitMetaResult:
    """Fit the radial-plot regression and form the adjusted estimate."""
    m = len(effects)
    if m < 3:
        raise InsufficientStudies(f"limit_meta needs >= 3 studies, got {m}")
    se = np.array([e.se for e in effects])
    if np.ptp(se) == 0.0:
        raise SingularDesign("all standard errors equal; the radial "
                             "regressor is constant")
    y = np.array([e.value for e in effects])

    dl = dl_random_effects(effects)
    tau = math.sqrt(dl.tau2)
    denom = se + tau
    fit = wls_fit(1.0 / denom, y / denom, np.ones(m))
    alpha_hat, slope = fit.coefficients

    adjusted = slope + tau * alpha_hat
    var = (fit.covariance[1, 1] + tau * tau * fit.covariance[0, 0]
           + 2.0 * tau * fit.covariance[0, 1])
    adj_se = math.sqrt(max(var, 0.0))
    pooled = MetaResult(
        estimate=adjusted, se=adj_se,
        ci_low=adjusted - Z_975 * adj_se, ci_high=adjusted + Z_975 * adj_se,
        tau2=dl.tau2, q_stat=dl.q_stat, method="limit_meta",
        diagnostics={"alpha_hat": alpha_hat, "tau_hat": tau})
    return LimitMetaResult(pooled=pooled, alpha_hat=alpha_hat, tau_hat=tau,
                           slope=slope, intercept=alpha_hat,
                           reg_cov=fit.covariance)
