"""p-uniform: effect estimation from the significant studies only.

Conditional on significance, the one-sided p-values are uniform at the true
effect.  The estimator solves ``L(y) = m`` where
``L(y) = -sum log p_i(y)`` and ``p_i(y)`` is the ratio of normal survival
probabilities beyond the observed effect and beyond the significance
threshold; confidence limits replace ``m`` with gamma(m, 1) quantiles.

Inclusion (and the per-study threshold) is one-sided at level alpha/2 in the
positive direction: a study enters when its effect exceeds the t-based
critical value mapped to the SMD scale,
``crit_i = t_{1-alpha/2, df_i} / sqrt(n1 n0 / (n1+n0))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .effects import EffectEstimate
from .errors import EstimateAtBoundary, NoSignificantStudies, NotSignificant
from .numerics import gamma_quantile, log_norm_cdf, t_quantile
from .pooling import fixed_effects

__all__ = ["PUniformResult", "conditional_p", "significance_threshold",
           "p_uniform"]

_MAX_EXPANSIONS = 50


@dataclass(frozen=True)
class PUniformResult:
    estimate: float
    ci_low: float
    ci_high: float
    n_significant: int
    l_stat_at_estimate: float


def significance_threshold(effect: EffectEstimate, alpha: float = 0.05) -> float:
    """Critical effect size: the t critical value on the SMD scale."""
    scale = math.sqrt(effect.n1 * effect.n0 / (effect.n1 + effect.n0))
    return t_quantile(1.0 - alpha / 2.0, effect.df) / scale


def _log_conditional_p(y: float, effect: EffectEstimate, crit: float) -> float:
    # survival functions rewritten as lower tails of the reflected argument,
    # so the ratio stays finite even when both tails underflow
    se = effect.se
    return (log_norm_cdf((y - effect.value) / se)
            - log_norm_cdf((y - crit) / se))


def conditional_p(y: float, effect: EffectEstimate, crit: float) -> float:
    """One-sided p-value of the effect conditional on exceeding ``crit``.

    Both tails are survival functions of the normal with mean ``y`` and the
    study's sampling variance, evaluated via the complementary CDF (in log
    space) so deep tails keep full precision.
    """
    if effect.value < crit:
        raise NotSignificant(
            f"effect {effect.value} below the critical value {crit}")
    return math.exp(_log_conditional_p(y, effect, crit))


def _l_stat(y: float, sig: list[tuple[EffectEstimate, float]]) -> float:
    total = 0.0
    for effect, crit in sig:
        total -= _log_conditional_p(y, effect, crit)
    return total


def _solve(target: float, sig: list[tuple[EffectEstimate, float]],
           center: float, half_width: float) -> float:
    """Root of L(y) = target; L is continuous and strictly decreasing in y.

    The bracket expands geometrically from the fixed-effects estimate until
    the sign changes (cap: 50 expansions).
    """
    lo = center - half_width
    hi = center + half_width
    for _ in range(_MAX_EXPANSIONS):
        f_lo = _l_stat(lo, sig) - target
        f_hi = _l_stat(hi, sig) - target
        if f_lo > 0.0 >= f_hi or f_lo >= 0.0 > f_hi:
            break
        if f_lo <= 0.0:
            lo -= (hi - lo)
        if f_hi > 0.0:
            hi += (hi - lo)
    else:
        raise EstimateAtBoundary(
            "L(y) never crosses the target; degenerate significant set "
            "(e.g. a study exactly at its critical value)")
    assert _l_stat(lo, sig) >= _l_stat(hi, sig), "L must be decreasing"
    # bisection on the decreasing function
    for _ in range(200):
        if hi - lo <= 1e-10:
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _l_stat(mid, sig) - target > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def p_uniform(effects: list[EffectEstimate],
              alpha: float = 0.05) -> PUniformResult:
    """Estimate the effect from the significant subset of the studies."""
    sig = []
    for e in effects:
        crit = significance_threshold(e, alpha)
        if e.value > crit:
            sig.append((e, crit))
    if not sig:
        raise NoSignificantStudies("no study passes the significance filter")
    m_sig = len(sig)

    center = fixed_effects([e for e, _ in sig]).estimate
    half_width = 10.0 * max(e.se for e, _ in sig)

    estimate = _solve(float(m_sig), sig, center, half_width)
    ci_low = _solve(gamma_quantile(1.0 - alpha / 2.0, m_sig, 1.0), sig,
                    center, half_width)
    ci_high = _solve(gamma_quantile(alpha / 2.0, m_sig, 1.0), sig,
                     center, half_width)
    return PUniformResult(estimate=estimate, ci_low=ci_low, ci_high=ci_high,
                          n_significant=m_sig,
                          l_stat_at_estimate=_l_stat(estimate, sig))
